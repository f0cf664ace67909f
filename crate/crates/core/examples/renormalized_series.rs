//! The renormalized equation as an identity between tree series.

use decotree::basis::{Bounds, GradedBasis};
use decotree::renorm::BphzStar;
use decotree::rules::EquationSpec;
use decotree::series::verify_renormalized_series;
use decotree::verify::default_character;

fn main() {
    for (name, bounds) in [("gkpz", Bounds::new(3, 3, 1, 1)), ("phi4-like", Bounds::new(3, 3, 1, 0))] {
        let spec = EquationSpec::preset(name).unwrap();
        let ch = default_character(&spec).unwrap();
        let basis = GradedBasis::enumerate(spec.signature(), bounds).unwrap();
        let rep = verify_renormalized_series(&spec, &BphzStar::new(ch), 0, &basis).unwrap();
        println!("{name}: {} ({} nonzero coefficients)", rep.check, rep.nonzero);
    }
}
