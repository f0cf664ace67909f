//! Bounded bases, conforming trees and the negative trees of each preset.

use decotree::basis::{Bounds, GradedBasis};
use decotree::rules::{EquationSpec, PRESET_NAMES};
use decotree::scalar::fmt_rational;

fn main() {
    for name in PRESET_NAMES {
        let spec = EquationSpec::preset(name).unwrap();
        let sig = spec.signature();
        let all = GradedBasis::enumerate(sig, Bounds::new(2, 2, 1, 1)).unwrap();
        let conforming = spec.generate_conforming().unwrap();
        let negs = spec.negative_basis().unwrap();
        println!(
            "{name}: {} trees within (2,2,1,1), {} conforming, {} negative",
            all.len(),
            conforming.len(),
            negs.len()
        );
        for t in negs.trees().iter().take(6) {
            println!("    {:>8}  {}", fmt_rational(&t.degree(sig)), t.to_text(sig));
        }
    }
}
