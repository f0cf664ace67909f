//! A BPHZ character, its preparation map and the preparation-map axioms.

use std::sync::Arc;

use decotree::basis::{Bounds, GradedBasis, TreeMap};
use decotree::renorm::{check_preparation, BphzForward, BphzStar, Character};
use decotree::rules::EquationSpec;
use decotree::{format_vec, parse_tree, Scalar};

fn main() {
    let spec = EquationSpec::preset("gkpz").unwrap();
    let sig = spec.signature();
    let negs = spec.negative_basis().unwrap();
    let loop_tree = parse_tree("I[t1,(0,1)](xi_1) * I[t1,(0,1)](xi_1)", sig).unwrap();
    let ch = Character::one_point(negs.trees(), loop_tree, Scalar::symbol("c")).unwrap();
    println!("character: {}", ch.to_json(sig));

    let r = BphzForward::new(ch.clone());
    let rstar = BphzStar::new(ch);
    let tau = parse_tree("I[t1,(0,0)](xi_1)", sig).unwrap();
    println!("R* {} = {}", tau.to_text(sig), format_vec(&rstar.apply(&tau).unwrap(), sig));
    let mu = parse_tree("I[t1,(0,1)](xi_1) * I[t1,(0,1)](xi_1) * I[t1,(0,0)](xi_1)", sig).unwrap();
    println!("R {} = {}", mu.to_text(sig), format_vec(&r.apply(&mu).unwrap(), sig));

    let basis = Arc::new(GradedBasis::enumerate(sig, Bounds::new(3, 3, 0, 1)).unwrap());
    let rep = check_preparation(&r, &rstar, &basis).unwrap();
    for c in rep.checks() {
        println!("{c}");
    }
}
