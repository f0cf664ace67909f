//! Runs the fast verification suites with their default bounds.

use decotree::rules::EquationSpec;
use decotree::verify::{run_suite, Suite, VerifyConfig};

fn main() {
    let spec = EquationSpec::preset("gkpz").unwrap();
    for suite in [Suite::Faa, Suite::Morphism] {
        let cfg = VerifyConfig::new(spec.clone(), suite).unwrap();
        println!("{}", run_suite(suite, &cfg).unwrap());
    }
}
