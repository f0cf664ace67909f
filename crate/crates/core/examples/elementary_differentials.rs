//! Elementary differentials, the operator identities and counterterm tables.

use decotree::diff::{faa_di_bruno_check, upsilon};
use decotree::rules::EquationSpec;
use decotree::series::{counterterms, formal_character};
use decotree::verify::default_character;
use decotree::{parse_tree, MultiIndex};

fn main() {
    let spec = EquationSpec::preset("gkpz").unwrap();
    let sig = spec.signature();
    let nl = spec.nonlinearity();
    for text in ["xi_1", "I[t1,(0,1)](xi_1) * xi_1", "I[t1,(0,1)](xi_1) * I[t1,(0,1)](xi_1)"] {
        let t = parse_tree(text, sig).unwrap();
        println!("F({text}) = {}", upsilon(nl, 0, &t).to_text(sig));
    }

    let f = parse_tree("xi_1", sig).unwrap();
    let g = upsilon(nl, 0, &f);
    let vars = g.active_vars();
    for k in MultiIndex::all_up_to(2, 2) {
        assert!(faa_di_bruno_check(&k, &g, &vars));
    }
    println!("Faa di Bruno holds for all orders up to 2");

    let generic = counterterms(&spec, &formal_character(&spec).unwrap(), 0).unwrap();
    println!("{} counterterms with one symbol per negative tree; the first three:", generic.entries.len());
    for (t, e) in generic.entries.iter().take(3) {
        println!("  {:<50} {}", t.to_text(sig), e.to_text(sig));
    }
    println!("{}", generic.equivalence);

    let ct = counterterms(&spec, &default_character(&spec).unwrap(), 0).unwrap();
    for (t, e) in &ct.entries {
        println!("one-point character: {} -> {}", t.to_text(sig), e.to_text(sig));
    }
    println!("{}", ct.noise_free);
}
