//! End-to-end acceptance checks. Runs without the libtest harness so that
//! each criterion prints exactly one PASS or FAIL line.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use landau_core::adplan::{build_plan, NeedSet, NONE};
use landau_core::codegen::Machine;
use landau_core::elaborator::CellRef;
use landau_core::harness::fd::relative_error;
use landau_core::harness::native::build_native;
use landau_core::harness::{
    check_jacobian_args, integrate, report_stats, variational_initial, Step,
};
use landau_core::inputs::Inputs;
use landau_core::{compile, Compilation, CompileOptions};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn corpus_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/corpus")
        .join(name)
}

fn source(name: &str) -> String {
    std::fs::read_to_string(corpus_path(name)).unwrap()
}

fn compile_with(name: &str, defines: &[(&str, i64)]) -> Compilation {
    let opts = CompileOptions {
        defines: defines.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
    };
    compile(&source(name), &opts).unwrap_or_else(|d| panic!("{name}: {}", d.render(name)))
}

/// Every corpus program; migration is reduced so dense oracles stay cheap.
fn corpus() -> Vec<(&'static str, Compilation)> {
    vec![
        ("kepler", compile_with("kepler.landau", &[])),
        ("spacecraft", compile_with("spacecraft.landau", &[])),
        (
            "migration",
            compile_with("migration.landau", &[("N", 12), ("k", 3)]),
        ),
        ("discard", compile_with("discard.landau", &[])),
        ("two_terms", compile_with("two_terms.landau", &[])),
        ("square", compile_with("square.landau", &[])),
    ]
}

fn random_args(c: &Compilation, rng: &mut StdRng) -> Vec<Vec<f64>> {
    c.lir
        .args
        .iter()
        .map(|&a| {
            (0..c.lir.vars[a].size)
                .map(|_| rng.gen_range(0.5..1.5))
                .collect()
        })
        .collect()
}

fn refs(args: &[Vec<f64>]) -> Vec<&[f64]> {
    args.iter().map(Vec::as_slice).collect()
}

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn corpus_fidelity() -> Outcome {
    for name in ["kepler.landau", "spacecraft.landau", "migration.landau"] {
        compile(&source(name), &CompileOptions::default()).map_err(|d| d.render(name))?;
    }
    let (n, k) = (4usize, 2usize);
    let c = compile_with("migration.landau", &[("N", n as i64), ("k", k as i64)]);
    let text = c.trace.render_reversed(&c.program);
    let mut ranks = Vec::new();
    let (mut needs, mut haves) = (0, 0);
    for line in text.lines() {
        let rank = if line.starts_with("need-this-derivative ") {
            needs += usize::from(line.starts_with("need-this-derivative p_dot["));
            0
        } else if line.ends_with("depends-from {}") {
            continue;
        } else if line.contains(" depends-from {") {
            1
        } else if line.starts_with("have-this-derivative ") {
            haves += 1;
            2
        } else {
            return Err(format!("unexpected trace line `{line}`"));
        };
        ranks.push(rank);
    }
    ensure(ranks.windows(2).all(|w| w[0] <= w[1]), || {
        "need, depends-from and have lines are interleaved".into()
    })?;
    ensure((0..3).all(|r| ranks.contains(&r)), || {
        "a section of the trace is missing".into()
    })?;
    ensure(needs == n * n / k, || {
        format!("{needs} p_dot needs, expected {}", n * n / k)
    })?;
    ensure(haves == n * n, || {
        format!("{haves} have lines, expected {}", n * n)
    })?;
    ensure(
        text.ends_with("have-this-derivative p[0] ' p0[0]\n"),
        || "trace does not end at p[0] ' p0[0]".into(),
    )?;
    Ok(format!("kepler, spacecraft and migration compile; N={n} k={k} trace is {needs} needs, then depends-from, then {haves} haves"))
}

fn sparsity() -> Outcome {
    let c = compile_with("migration.landau", &[("N", 100), ("k", 10)]);
    let stats = report_stats(&c.program, &c.lir.plan);
    let row = stats.row("p_dot", "p0").ok_or("no p_dot ' p0 storage")?;
    ensure(row.packed == 1000 && row.dense == 10000, || {
        format!("N=100: packed {} dense {}", row.packed, row.dense)
    })?;

    let start = Instant::now();
    let c = compile_with("migration.landau", &[]);
    let elapsed = start.elapsed();
    let stats = report_stats(&c.program, &c.lir.plan);
    let row = stats.row("p_dot", "p0").ok_or("no p_dot ' p0 storage")?;
    ensure(row.packed == 100_000, || {
        format!("N=1000: packed {}", row.packed)
    })?;
    ensure(elapsed < Duration::from_secs(120), || {
        format!("N=1000 took {elapsed:?}")
    })?;
    Ok(format!(
        "N=100: 1000 of 10000; N=1000: {} slots in {:.2}s",
        row.packed,
        elapsed.as_secs_f64()
    ))
}

fn ad_correctness() -> Outcome {
    let mut rng = StdRng::seed_from_u64(1);
    let mut total = 0;
    let mut worst = 0.0f64;
    for (name, c) in corpus() {
        for _ in 0..20 {
            let args = random_args(&c, &mut rng);
            let r = check_jacobian_args(&c, &refs(&args), 1e-6, Step::Auto)
                .map_err(|e| format!("{name}: {e}"))?;
            if let Some(e) = r.entries.iter().find(|e| !e.pass) {
                return Err(format!(
                    "{name}: {} ' {} ad {:e} fd {:e} relerr {:e}",
                    e.cell, e.param, e.ad, e.fd, e.relerr
                ));
            }
            total += r.entries.len();
            worst = worst.max(r.max_relerr);
        }
    }
    let kepler = compile_with("kepler.landau", &[]);
    let mut m = Machine::new(&kepler.lir);
    for _ in 0..20 {
        let (e_anom, ecc) = (rng.gen_range(-3.0..3.0), rng.gen_range(0.0..0.99));
        let out = m.run_args(&[&[e_anom], &[ecc]]);
        let want = [1.0 - ecc * f64::cos(e_anom), -f64::sin(e_anom)];
        for (got, want) in out[1..].iter().zip(want) {
            ensure((got - want).abs() <= 1e-12 * want.abs().max(1e-300), || {
                format!("kepler at E={e_anom} e={ecc}: {got:e} vs closed form {want:e}")
            })?;
        }
    }
    Ok(format!(
        "{total} entries over 6 programs, max relerr {worst:.2e}; kepler closed forms hold"
    ))
}

fn backend_equivalence() -> Outcome {
    let mut rng = StdRng::seed_from_u64(2);
    let mut programs = corpus();
    programs[2] = (
        "migration",
        compile_with("migration.landau", &[("N", 100), ("k", 10)]),
    );
    let mut compared = 0;
    for (name, c) in programs {
        let native = build_native(&c.lir).map_err(|e| format!("{name}: {e}"))?;
        ensure(native.diagnostics.trim().is_empty(), || {
            format!("{name}: compiler output:\n{}", native.diagnostics)
        })?;
        let cases: Vec<Vec<Vec<f64>>> = (0..100).map(|_| random_args(&c, &mut rng)).collect();
        let got = native.run(&cases).map_err(|e| format!("{name}: {e}"))?;
        let mut m = Machine::new(&c.lir);
        for (case, row) in cases.iter().zip(&got) {
            let want = m.run_args(&refs(case));
            for (k, (a, b)) in row.iter().zip(&want).enumerate() {
                ensure((a - b).abs() <= 1e-12 * a.abs().max(b.abs()), || {
                    format!("{name}[{k}]: C {a:e} interp {b:e}")
                })?;
                compared += 1;
            }
        }
    }
    Ok(format!(
        "{compared} outputs agree; C builds without diagnostics"
    ))
}

fn variational() -> Outcome {
    let c = compile_with("spacecraft.landau", &[]);
    let gm = 1.0;
    let fixed = |gm: f64| -> Inputs { [("GM".to_string(), vec![gm])].into_iter().collect() };
    let orbit = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0];
    let quarter = std::f64::consts::FRAC_PI_2;
    let steps = 2500;
    let run = |state: &[f64], gm: f64, t: f64, steps: usize| -> Result<Vec<f64>, String> {
        let tr = integrate(
            &c.lir,
            "x",
            &fixed(gm),
            &variational_initial(state, 1),
            (0.0, t),
            steps,
        )
        .map_err(|e| e.to_string())?;
        Ok(tr.last().to_vec())
    };
    let base = run(&orbit, gm, quarter, steps)?;
    let h = 1e-6;
    let mut worst = 0.0f64;
    for col in 0..7 {
        let (plus, minus) = if col < 6 {
            let (mut a, mut b) = (orbit, orbit);
            a[col] += h;
            b[col] -= h;
            (run(&a, gm, quarter, steps)?, run(&b, gm, quarter, steps)?)
        } else {
            (
                run(&orbit, gm + h, quarter, steps)?,
                run(&orbit, gm - h, quarter, steps)?,
            )
        };
        for row in 0..6 {
            let fd = (plus[row] - minus[row]) / (2.0 * h);
            let ad = if col < 6 {
                base[6 + row * 6 + col]
            } else {
                base[42 + row]
            };
            let e = relative_error(ad, fd);
            worst = worst.max(e);
            ensure(e <= 1e-4, || {
                format!("d state[{row}] / d P[{col}]: ad {ad:e} fd {fd:e} relerr {e:e}")
            })?;
        }
    }
    let period = 2.0 * std::f64::consts::PI;
    let end = run(&orbit, gm, period, 10_000)?;
    let drift = (0..6)
        .map(|i| (end[i] - orbit[i]).abs())
        .fold(0.0, f64::max);
    ensure(drift <= 1e-6, || {
        format!("orbit misses closure by {drift:e}")
    })?;
    Ok(format!(
        "quarter-orbit Jacobian max relerr {worst:.2e}; period closure {drift:.2e}"
    ))
}

fn discard_semantics() -> Outcome {
    let three = compile_with("discard.landau", &[]);
    let two = compile_with("two_terms.landau", &[]);
    let (mut m3, mut m2) = (Machine::new(&three.lir), Machine::new(&two.lir));
    let mut rng = StdRng::seed_from_u64(3);
    for _ in 0..100 {
        let a: f64 = rng.gen_range(-2.0..2.0);
        let d3 = m3.run_args(&[&[a]])[1];
        let d2 = m2.run_args(&[&[a]])[1];
        ensure(d3.to_bits() == d2.to_bits(), || {
            format!("a={a}: {d3:e} vs {d2:e}")
        })?;
        let closed = 2.0 * a + a.exp();
        ensure((d3 - closed).abs() <= 1e-14 * closed.abs().max(1.0), || {
            format!("a={a}: {d3:e} vs 2a + exp(a)")
        })?;
    }
    Ok("dx/da is bitwise equal to the two-term program at 100 points".into())
}

const ILL_FORMED: &[(&str, &str, &str)] = &[
    (
        "real_condition",
        "real f(real x) {\n  if (x > 0) {\n    f = x\n  }\n}",
        "real in condition",
    ),
    (
        "slice_mismatch",
        "real[3] f(real[4] b) {\n  real[3] a\n  a[:] = b[:4]\n  f[:] = a[:]\n}",
        "slice length mismatch: 3 vs 4",
    ),
    (
        "real_bound",
        "real f(real x) {\n  for i = [0 : x] {\n    f = x\n  }\n}",
        "non-constant bound",
    ),
    (
        "variable_size",
        "real f(real x) {\n  int n = 2\n  real[n] a\n  f = x\n}",
        "non-constant array size",
    ),
    (
        "reversed_slice",
        "real[4] f(real[4] b) {\n  f[3 : 1] = b[3 : 1]\n}",
        "reversed slice",
    ),
    (
        "parameter_value",
        "parameter[2] p\nreal f(real x) {\n  f = p[0] * x\n}",
        "parameter `p` used as a value",
    ),
    (
        "out_of_bounds",
        "real f(real[3] x) {\n  f = x[3]\n}",
        "index out of bounds",
    ),
    (
        "undefined_name",
        "real f(real x) {\n  f = y\n}",
        "undefined name `y`",
    ),
    (
        "recursion",
        "real f(real x) {\n  f = f(x)\n}",
        "unknown function `f`",
    ),
    (
        "integer_derivative",
        "real f(real x) {\n  int k = 2\n  f = k ' x\n}",
        "derivative of integer",
    ),
    (
        "duplicate",
        "real f(real x) {\n  real y = x\n  real y = x\n  f = y\n}",
        "duplicate declaration",
    ),
    ("syntax", "real f(real x) {\n  f = (x +\n}", "syntax error"),
    (
        "reserved_name",
        "real main(real x) {\n  main = x\n}",
        "reserved",
    ),
    (
        "huge_unroll",
        "real f(real x) {\n  for i = [0 : 10000000000] {\n    f = x\n  }\n}",
        "program too large",
    ),
];

fn restriction_safety() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    for (name, body, diag) in ILL_FORMED {
        let file = dir.path().join(format!("{name}.landau"));
        std::fs::write(&file, format!("#lang landau\n{body}\n")).map_err(|e| e.to_string())?;
        let out = Command::new(env!("CARGO_BIN_EXE_landau"))
            .arg("build")
            .arg(&file)
            .output()
            .map_err(|e| e.to_string())?;
        let err = String::from_utf8_lossy(&out.stderr);
        ensure(out.status.code() == Some(1), || {
            format!("{name}: exit {:?}, stderr {err}", out.status.code())
        })?;
        ensure(err.contains(diag), || {
            format!("{name}: expected `{diag}`, got {err}")
        })?;
    }
    Ok(format!(
        "{} ill-formed programs rejected with exit 1",
        ILL_FORMED.len()
    ))
}

fn mapping_round_trip() -> Outcome {
    let mut rng = StdRng::seed_from_u64(4);
    let mut checked = 0usize;
    for trial in 0..1000 {
        let vars = rng.gen_range(1..4);
        let sizes: Vec<usize> = (0..vars).map(|_| rng.gen_range(1..16)).collect();
        let width = rng.gen_range(1..64u32);
        let mut needs = NeedSet::default();
        for (v, &size) in sizes.iter().enumerate() {
            for c in 0..size {
                if rng.gen_bool(0.3) {
                    continue;
                }
                let params: Vec<u32> = (0..width).filter(|_| rng.gen_bool(0.25)).collect();
                needs.entries.insert((CellRef::new(v, c as u32), 0), params);
            }
        }
        let plan = build_plan(&needs, &sizes);
        for vp in plan.values() {
            for c in 0..vp.cells() {
                for slot in 0..vp.h(c) {
                    let q = vp.mapping[vp.offsets[c] as usize + slot];
                    ensure(vp.local(c, q) == Some(slot as u32), || {
                        format!("trial {trial}: slot {slot} of cell {c}")
                    })?;
                    checked += 1;
                }
                for q in 0..vp.width {
                    let s = vp.inverse[c * vp.width as usize + q as usize];
                    if s != NONE {
                        ensure(vp.params(c)[s as usize] == q, || {
                            format!("trial {trial}: param {q} of cell {c}")
                        })?;
                        checked += 1;
                    }
                }
                ensure(
                    vp.params(c) == needs.get(CellRef::new(vp.var, c as u32), 0),
                    || format!("trial {trial}: cell {c} params"),
                )?;
            }
        }
    }
    Ok(format!(
        "1000 need sets, {checked} slot and parameter lookups round-trip"
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("corpus fidelity", corpus_fidelity),
        ("sparsity", sparsity),
        ("AD correctness", ad_correctness),
        ("backend equivalence", backend_equivalence),
        ("variational equations", variational),
        ("discard semantics", discard_semantics),
        ("restriction safety", restriction_safety),
        ("mapping round-trip", mapping_round_trip),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into()))
        });
        match result {
            Ok(detail) => println!("PASS {} {name}: {detail}", k + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {} {name}: {detail}", k + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
