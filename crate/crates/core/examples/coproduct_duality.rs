//! The recentering coproduct and its duality with the star product.

use decotree::basis::{Bounds, GradedBasis};
use decotree::coproduct::{check_duality, coproduct_dual};
use decotree::parse_tree;
use decotree::rules::EquationSpec;

fn main() {
    let spec = EquationSpec::preset("gkpz").unwrap();
    let sig = spec.signature();
    let mu = parse_tree("X[(0,1)] * I[t1,(0,0)](xi_1)", sig).unwrap();
    println!("coproduct of {}:", mu.to_text(sig));
    for ((left, right), c) in coproduct_dual(&mu, sig).iter() {
        println!("  {c}  {}  (x)  {}", left.to_text(sig), right.to_text(sig));
    }

    let basis = GradedBasis::enumerate(sig, Bounds::new(2, 2, 1, 1)).unwrap();
    let rep = check_duality(&basis);
    println!("duality on {} trees: {} entries, failure: {:?}", basis.len(), rep.checked, rep.failure);
}
