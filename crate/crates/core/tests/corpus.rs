//! End-to-end behaviour of the shipped corpus programs.

use landau_core::codegen::{emit_c, Machine};
use landau_core::frontend::parse_source;
use landau_core::frontend::pretty::pretty_print;
use landau_core::inputs::Inputs;
use landau_core::{compile, CompileOptions};

fn source(name: &str) -> String {
    std::fs::read_to_string(format!(
        "{}/corpus/{name}.landau",
        env!("CARGO_MANIFEST_DIR")
    ))
    .unwrap()
}

const ALL: [&str; 6] = [
    "kepler",
    "spacecraft",
    "migration",
    "discard",
    "two_terms",
    "square",
];

#[test]
fn corpus_parses_and_round_trips() {
    for name in ALL {
        let tree = parse_source(&source(name)).unwrap_or_else(|d| panic!("{name}: {}", d.message));
        let printed = pretty_print(&tree);
        let again = parse_source(&printed).unwrap();
        assert_eq!(pretty_print(&again), printed, "{name}");
    }
}

#[test]
fn corpus_compiles_without_diagnostics() {
    for name in ALL {
        let defines = if name == "migration" {
            [("N".to_string(), 10), ("k".to_string(), 2)]
                .into_iter()
                .collect()
        } else {
            Default::default()
        };
        compile(&source(name), &CompileOptions { defines })
            .unwrap_or_else(|d| panic!("{}", d.render(name)));
    }
}

#[test]
fn kepler_values() {
    let c = compile(&source("kepler"), &CompileOptions::default()).unwrap();
    let inputs: Inputs = [("E".to_string(), vec![0.5]), ("e".to_string(), vec![0.1])]
        .into_iter()
        .collect();
    let out = Machine::new(&c.lir).run(&inputs).unwrap();
    let (big_e, e) = (0.5f64, 0.1f64);
    assert!((out[0] - (big_e - e * big_e.sin())).abs() < 1e-15);
    assert!((out[0] - 0.452057446).abs() < 1e-9);
    assert!((out[1] - 0.912241).abs() < 1e-6);
    assert!((out[2] + 0.479426).abs() < 1e-6);
}

#[test]
fn migration_at_origin() {
    let n = 6;
    let defines = [("N".to_string(), n as i64), ("k".to_string(), 2)]
        .into_iter()
        .collect();
    let c = compile(&source("migration"), &CompileOptions { defines }).unwrap();
    let mut ident = vec![0.0; n * n];
    for i in 0..n {
        ident[i * n + i] = 1.0;
    }
    let inputs: Inputs = [
        ("m".to_string(), vec![0.0; n * n]),
        ("p".to_string(), vec![0.0; n]),
        ("derivatives_p0".to_string(), ident),
    ]
    .into_iter()
    .collect();
    let out = Machine::new(&c.lir).run(&inputs).unwrap();
    assert!(out[..n].iter().all(|&x| x == 0.0));
}

#[test]
fn migration_lowering_keeps_loops() {
    let defines = [("N".to_string(), 100), ("k".to_string(), 10)]
        .into_iter()
        .collect();
    let c = compile(&source("migration"), &CompileOptions { defines }).unwrap();
    let text = c.lir.to_string();
    assert!(text.contains("for q in mapping(p_dot, p0"), "{text}");
    let unit = emit_c(&c.lir);
    assert!(
        unit.contains("double ld_d4_0[1000] = {0}; /* d(p_dot)/d(p0) */"),
        "{unit}"
    );
    assert!(unit.len() < 400_000);
}

#[test]
fn kepler_lowering_is_straight_line() {
    let c = compile(&source("kepler"), &CompileOptions::default()).unwrap();
    assert!(!c.lir.to_string().contains("for "));
}

#[test]
fn spacecraft_signature() {
    let c = compile(&source("spacecraft"), &CompileOptions::default()).unwrap();
    assert!(emit_c(&c.lir).contains("void x_dot(double *ret, const double *x, double GM)"));
}
