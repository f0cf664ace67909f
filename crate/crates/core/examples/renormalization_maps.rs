//! The renormalization map M = M°R, its adjoint, and the BCK roundtrip
//! between morphisms and preparation maps.

use std::sync::Arc;

use decotree::basis::{Bounds, GradedBasis, TreeMap};
use decotree::renorm::{
    bck_recover_preparation, bck_roundtrip, check_renorm_adjoint, BphzForward, BphzStar, Character, MCirc,
    ProjectedAdjoint, RenormMap,
};
use decotree::rules::EquationSpec;
use decotree::{format_vec, parse_tree, Scalar};

fn main() {
    let spec = EquationSpec::preset("gkpz").unwrap();
    let sig = spec.signature();
    let negs = spec.negative_basis().unwrap();
    let loop_tree = parse_tree("I[t1,(0,1)](xi_1) * I[t1,(0,1)](xi_1)", sig).unwrap();
    let ch = Character::one_point(negs.trees(), loop_tree, Scalar::symbol("c")).unwrap();
    let r = BphzForward::new(ch.clone());
    let m = RenormMap::new(&r);
    let t = parse_tree("I[t1,(0,0)](I[t1,(0,1)](xi_1) * I[t1,(0,1)](xi_1) * xi_1)", sig).unwrap();
    println!("M {} = {}", t.to_text(sig), format_vec(&m.apply(&t).unwrap(), sig));

    let basis = Arc::new(GradedBasis::enumerate(sig, Bounds::new(3, 3, 0, 1)).unwrap());
    for c in check_renorm_adjoint(&BphzStar::new(ch), &MCirc::new(&r), &basis).unwrap() {
        println!("{c}");
    }

    let bck = EquationSpec::preset("bck").unwrap();
    let bsig = bck.signature();
    let bnegs = bck.negative_basis().unwrap();
    let cherry = parse_tree("xi_1 * I[t1,(0)](xi_1)", bsig).unwrap();
    let ch = Character::one_point(bnegs.trees(), cherry, Scalar::symbol("c")).unwrap();
    let r = BphzForward::new(ch);
    let basis = Arc::new(GradedBasis::enumerate(bsig, Bounds::new(4, 3, 0, 0)).unwrap());
    let mstar = ProjectedAdjoint::new(&RenormMap::new(&r), &basis).unwrap();
    for c in bck_roundtrip(&mstar, &basis).unwrap() {
        println!("bck: {c}");
    }
    println!("bck: {}", bck_recover_preparation(&r, &basis).unwrap());
}
