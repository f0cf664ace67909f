//! Parsing, canonical printing, symmetry factors and degrees.

use decotree::grammar::render_parse_error;
use decotree::parse_tree;
use decotree::rules::EquationSpec;
use decotree::scalar::fmt_rational;

fn main() {
    let spec = EquationSpec::preset("gkpz").unwrap();
    let sig = spec.signature();
    for text in [
        "I[t1,(0,1)](xi_1) * I[t1,(0,1)](xi_1)",
        "xi_1 * X[(1,0)] * I[t1,(0,0)](xi_1)",
        "I[t1,(0,0)](I[t1,(0,1)](xi_1) * xi_1)",
    ] {
        let t = parse_tree(text, sig).unwrap();
        println!(
            "{:<45} S = {:<3} degree = {}",
            t.to_text(sig),
            fmt_rational(&t.symmetry_factor()),
            fmt_rational(&t.degree(sig))
        );
    }

    // Children are sorted, so equal trees print identically.
    let a = parse_tree("I[t1,(0,0)](1) * xi_1 * I[t1,(0,1)](xi_1)", sig).unwrap();
    let b = parse_tree("I[t1,(0,1)](xi_1) * I[t1,(0,0)](1) * xi_1", sig).unwrap();
    assert_eq!(a, b);
    println!("canonical form: {}", a.to_text(sig));

    let bad = "I[t1,(0,0)](xi_1) * I[t7,(0,0)](1)";
    let err = parse_tree(bad, sig).unwrap_err();
    println!("{}", render_parse_error(bad, &err));
}
