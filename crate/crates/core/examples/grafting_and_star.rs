//! Deformed grafting, decoration raising and the star product.

use decotree::grafting::{graft, raise_all, star, star_vec};
use decotree::rules::EquationSpec;
use decotree::{format_vec, parse_label, parse_tree, MultiIndex, TreeVec};

fn main() {
    let spec = EquationSpec::preset("gkpz").unwrap();
    let sig = spec.signature();
    let t = |s: &str| parse_tree(s, sig).unwrap();

    let x = t("X[(1,0)]");
    let xi = t("xi_1");
    println!("X ⋆ xi = {}", format_vec(&star(&x, &xi), sig));

    // Grafting onto a decorated node also produces the deformed terms with
    // the decoration moved onto the edge.
    let a = parse_label("t1,(0,0)", sig).unwrap();
    let target = t("X[(0,1)] * xi_1");
    println!("xi graft onto X[(0,1)] xi = {}", format_vec(&graft(&xi, &a, &target).unwrap(), sig));

    let planted = t("I[t1,(0,0)](xi_1) * I[t1,(0,0)](1)");
    println!("raise by (0,1) = {}", format_vec(&raise_all(&planted, &MultiIndex::from_slice(&[0, 1])), sig));

    let u = t("X[(0,1)] * I[t1,(0,0)](1)");
    let w = t("I[t1,(0,1)](xi_1)");
    let z = t("I[t1,(0,0)](xi_1)");
    let lhs = star_vec(&star(&u, &w), &TreeVec::from_tree(z.clone()));
    let rhs = star_vec(&TreeVec::from_tree(u), &star(&w, &z));
    println!("(u ⋆ w) ⋆ z = {}", format_vec(&lhs, sig));
    assert_eq!(lhs, rhs);
    println!("associativity holds on this triple");
}
