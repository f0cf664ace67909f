//! Looks for preparation maps that are not strong on small bases.

use std::sync::Arc;

use decotree::basis::{Bounds, GradedBasis};
use decotree::rules::EquationSpec;
use decotree::search::search_non_strong;

fn main() {
    for (name, bounds) in [("bck", Bounds::new(3, 2, 0, 0)), ("gkpz", Bounds::new(2, 1, 1, 1))] {
        let spec = EquationSpec::preset(name).unwrap();
        let basis = Arc::new(GradedBasis::enumerate(spec.signature(), bounds).unwrap());
        let rep = search_non_strong(&basis).unwrap();
        println!(
            "{name}: {} trees, {} unknowns, preparation maps {}, strong {}, witness {}",
            rep.basis_size,
            rep.unknowns,
            rep.preparation_dim,
            rep.strong_dim,
            if rep.witness.is_some() { "found" } else { "none" }
        );
    }
}
