//! Output formatting: 17-significant-digit floats for CSV and
//! human-readable text, JSON-safe encoding of non-finite values.

use serde_json::{json, Value};

/// 17 significant digits: enough to reproduce any f64 bit pattern.
pub fn f17(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

/// JSON value for a possibly non-finite f64 (JSON numbers cannot carry
/// infinities).
pub fn jf(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else if x.is_infinite() && x > 0.0 {
        json!("inf")
    } else if x.is_infinite() {
        json!("-inf")
    } else {
        json!("nan")
    }
}

pub fn print_or_write(target: &Option<String>, content: &str) -> std::io::Result<()> {
    match target {
        Some(path) => std::fs::write(path, content),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}
