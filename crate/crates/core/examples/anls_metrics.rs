//! Accuracy and ANLS for a few prediction/gold pairs.
//!
//! cargo run --example anls_metrics

use sfa::eval::{accuracy_match, anls_score, normalized_levenshtein, ANLS_THRESHOLD};

fn main() -> sfa::Result<()> {
    let cases = [
        ("Manchester", vec!["manchester"]),
        ("mancester", vec!["manchester"]),
        ("Half Price.", vec!["half price"]),
        ("half prize", vec!["half price", "50% off"]),
        ("abc", vec!["xyz"]),
    ];
    println!("{:<14} {:<26} {:>6} {:>4} {:>7}", "prediction", "golds", "NL", "acc", "anls");
    for (pred, golds) in cases {
        let golds: Vec<String> = golds.into_iter().map(String::from).collect();
        let nl = normalized_levenshtein(&pred.to_lowercase(), &golds[0]);
        println!(
            "{:<14} {:<26} {:>6.3} {:>4} {:>7.4}",
            pred,
            format!("{golds:?}"),
            nl,
            accuracy_match(pred, &golds)?,
            anls_score(pred, &golds, ANLS_THRESHOLD)?
        );
    }
    Ok(())
}
