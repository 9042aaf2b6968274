//! Regenerate the bundled chain spec files and the golden seeded path under
//! `fixtures/`. Run from the workspace root:
//! `cargo run -p ergokit --example regen_fixtures`.

use std::fs;

fn main() {
    for name in ["c1", "c2", "c3", "c4", "c5"] {
        let spec = ergokit::fixtures::by_name(name).unwrap();
        fs::write(format!("fixtures/{name}.json"), spec.to_json() + "\n").unwrap();
        println!("wrote fixtures/{name}.json");
    }
    let path = ergokit::hitting::simulate_trajectory(&ergokit::fixtures::c1(), (5, 0), 64, 42);
    let rows: Vec<Vec<u64>> = path.iter().map(|&(l, p)| vec![l, p as u64]).collect();
    fs::write(
        "fixtures/golden/c1_seed42_path.json",
        serde_json::to_string_pretty(&rows).unwrap() + "\n",
    )
    .unwrap();
    println!("wrote fixtures/golden/c1_seed42_path.json");
}
