//! Property tests over generated programs and need sets.

use landau_core::adplan::{build_plan, NeedSet, NONE};
use landau_core::codegen::{emit_c, Machine};
use landau_core::elaborator::CellRef;
use landau_core::frontend::parse_source;
use landau_core::frontend::pretty::pretty_print;
use landau_core::harness::refeval::dense_dual;
use landau_core::{compile, CompileOptions};
use proptest::prelude::*;

/// A random differentiable program over two scalar arguments and a
/// three-element array whose derivatives against `p0` are supplied.
#[derive(Debug, Clone)]
struct Gen {
    stmts: Vec<(u8, u8, u8, u8, bool)>,
    discards: Vec<(u8, bool)>,
    looped: bool,
}

fn leaf(k: usize, pick: u8) -> String {
    let base = ["a", "b", "u[0]", "u[1]", "u[2]", "0.5"];
    let n = base.len() + k;
    let i = pick as usize % n;
    if i < base.len() {
        base[i].to_string()
    } else {
        format!("x{}", i - base.len())
    }
}

fn render(g: &Gen) -> String {
    let mut s = String::from(
        "#lang landau\nparameter[3] p0\nreal[6] f(real a, real b, real[3] u, real[9] du) {\n",
    );
    s.push_str("  u[:] ' p0[:] = du[:]\n  real[3] v\n");
    for (k, &(op, l, r, wrap, acc)) in g.stmts.iter().enumerate() {
        let (l, r) = (leaf(k, l), leaf(k, r));
        let e = match op % 5 {
            0 => format!("{l} + {r}"),
            1 => format!("{l} - {r}"),
            2 => format!("{l} * {r}"),
            3 => format!("{l} / (2 + sqr({r}))"),
            _ => format!("-{l} * 0.25"),
        };
        let e = match wrap % 6 {
            0 => format!("sin({e})"),
            1 => format!("cos({e})"),
            2 => format!("atan({e})"),
            3 => format!("exp(0.1 * {e})"),
            4 => format!("sqrt(1 + sqr({e}))"),
            _ => e,
        };
        s.push_str(&format!("  real x{k} = {e}\n"));
        if acc {
            s.push_str(&format!("  x{k} += {l} * {r}\n"));
        }
    }
    let last = format!("x{}", g.stmts.len() - 1);
    for &(v, which) in &g.discards {
        let var = format!("x{}", v as usize % g.stmts.len());
        let space = if which { "a" } else { "p0[1]" };
        s.push_str(&format!("  discard {var} ' {space}\n"));
    }
    if g.looped {
        s.push_str(&format!("  for i = [0 : 3]\n    v[i] += u[i] * {last}\n"));
    } else {
        s.push_str(&format!("  v[:] = u[:] * {last}\n"));
    }
    s.push_str(&format!(
        "  f[0] = {last}\n  f[1] = {last} ' a\n  f[2] = {last} ' b\n"
    ));
    s.push_str("  f[3 : 6] = v[:] ' p0[1]\n}\n");
    s
}

fn gen() -> impl Strategy<Value = Gen> {
    (
        prop::collection::vec(
            (
                any::<u8>(),
                any::<u8>(),
                any::<u8>(),
                any::<u8>(),
                prop::bool::weighted(0.2),
            ),
            1..8,
        ),
        prop::collection::vec((any::<u8>(), any::<bool>()), 0..3),
        any::<bool>(),
    )
        .prop_map(|(stmts, discards, looped)| Gen {
            stmts,
            discards,
            looped,
        })
}

fn point() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (
        -1.5f64..1.5,
        -1.5f64..1.5,
        prop::collection::vec(-1.5f64..1.5, 3),
        prop::collection::vec(-1.0f64..1.0, 9),
    )
        .prop_map(|(a, b, u, du)| vec![vec![a], vec![b], u, du])
}

fn close(x: f64, y: f64) -> bool {
    (x - y).abs() <= 1e-10 * x.abs().max(y.abs()).max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn sparse_plan_matches_dense_gradients(g in gen(), args in point()) {
        let src = render(&g);
        let c = compile(&src, &CompileOptions::default()).unwrap();
        let refs: Vec<&[f64]> = args.iter().map(Vec::as_slice).collect();
        let got = Machine::new(&c.lir).run_args(&refs);
        let want = dense_dual(&c.program, &refs).outputs;
        for (k, (x, y)) in got.iter().zip(&want).enumerate() {
            prop_assert!(close(*x, *y), "output {k}: {x} vs {y}\n{src}");
        }
    }

    #[test]
    fn pretty_print_reparses_to_same_tree(g in gen()) {
        let src = render(&g);
        let once = pretty_print(&parse_source(&src).unwrap());
        let twice = pretty_print(&parse_source(&once).unwrap());
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn discard_never_grows_storage(g in gen(), v in any::<u8>(), which in any::<bool>()) {
        let base = compile(&render(&g), &CompileOptions::default()).unwrap();
        let mut more = g.clone();
        more.discards.push((v, which));
        let with = compile(&render(&more), &CompileOptions::default()).unwrap();
        for (key, vp) in &with.lir.plan.vars {
            let before = base.lir.plan.get(key.0, key.1).map_or(0, |p| p.total());
            prop_assert!(vp.total() <= before);
        }
    }

    #[test]
    fn emission_is_deterministic(g in gen()) {
        let src = render(&g);
        let a = emit_c(&compile(&src, &CompileOptions::default()).unwrap().lir);
        let b = emit_c(&compile(&src, &CompileOptions::default()).unwrap().lir);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn mapping_and_inverse_round_trip(
        cells in prop::collection::btree_map((0u32..3, 0u32..12), prop::collection::btree_set(0u32..40, 0..10), 0..20)
    ) {
        let mut needs = NeedSet::default();
        for ((v, c), params) in &cells {
            needs.entries.insert((CellRef::new(*v as usize, *c), 0), params.iter().copied().collect());
        }
        let plan = build_plan(&needs, &[12, 12, 12]);
        for vp in plan.values() {
            for c in 0..vp.cells() {
                for k in 0..vp.h(c) {
                    let q = vp.mapping[vp.offsets[c] as usize + k];
                    prop_assert_eq!(vp.local(c, q), Some(k as u32));
                }
                for q in 0..vp.width {
                    let s = vp.inverse[c * vp.width as usize + q as usize];
                    if s != NONE {
                        prop_assert_eq!(vp.params(c)[s as usize], q);
                    }
                }
                let want: Vec<u32> = cells
                    .get(&(vp.var as u32, c as u32))
                    .map(|s| s.iter().copied().collect())
                    .unwrap_or_default();
                prop_assert_eq!(vp.params(c), want.as_slice());
            }
        }
    }
}

#[test]
fn generator_covers_every_construct() {
    let g = Gen {
        stmts: vec![(0, 0, 1, 0, true), (3, 6, 2, 5, false)],
        discards: vec![(0, true)],
        looped: true,
    };
    let src = render(&g);
    let c = compile(&src, &CompileOptions::default()).unwrap();
    assert!(!c.lir.plan.is_empty());
    assert!(src.contains("discard x0 ' a") && src.contains("for i = [0 : 3]"));
}
