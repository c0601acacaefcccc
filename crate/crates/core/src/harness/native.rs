//! Builds emitted C with the system compiler and runs it on batches of
//! inputs through a small generated driver.

use std::io::Write as _;
use std::path::PathBuf;
use std::process::{Command, Stdio};

use crate::codegen::c::{emit_c, STRICT_FLAGS};
use crate::codegen::Lir;

#[derive(Debug, thiserror::Error)]
pub enum NativeError {
    #[error("cannot run C compiler `{cc}`: {message}")]
    CompilerMissing { cc: String, message: String },
    #[error("C compilation failed:\n{0}")]
    CompileFailed(String),
    #[error("native run failed: {0}")]
    Run(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Compiler command: `LANDAU_CC` if set, `cc` otherwise.
pub fn compiler() -> String {
    std::env::var("LANDAU_CC")
        .ok()
        .filter(|s| !s.trim().is_empty())
        .unwrap_or_else(|| "cc".into())
}

/// A compiled executable plus everything the compiler printed.
pub struct NativeBuild {
    _dir: tempfile::TempDir,
    exe: PathBuf,
    pub diagnostics: String,
    ret_len: usize,
    arg_lens: Vec<usize>,
}

/// C source of the driver: reads a case count and then, per case, every
/// argument in declaration order; prints one line of `%.17g` outputs.
pub fn driver_source(lir: &Lir) -> String {
    let mut s = String::from("#include <stdio.h>\n\n");
    let mut proto = vec!["double *ret".to_string()];
    for &a in &lir.args {
        let v = &lir.vars[a];
        proto.push(if v.scalar {
            "double".into()
        } else {
            "const double *".into()
        });
    }
    s.push_str(&format!("void {}({});\n\n", lir.name, proto.join(", ")));
    s.push_str("int main(void)\n{\n");
    s.push_str(&format!(
        "    static double ld_ret[{}];\n",
        lir.ret_len().max(1)
    ));
    for (k, &a) in lir.args.iter().enumerate() {
        let v = &lir.vars[a];
        if v.scalar {
            s.push_str(&format!("    double ld_a{k} = 0.0;\n"));
        } else {
            s.push_str(&format!("    static double ld_a{k}[{}];\n", v.size.max(1)));
        }
    }
    s.push_str("    long cases, c, i;\n");
    s.push_str("    if (scanf(\"%ld\", &cases) != 1) {\n        return 1;\n    }\n");
    s.push_str("    for (c = 0; c < cases; ++c) {\n");
    let mut call = vec!["ld_ret".to_string()];
    for (k, &a) in lir.args.iter().enumerate() {
        let v = &lir.vars[a];
        if v.scalar {
            s.push_str(&format!("        if (scanf(\"%lf\", &ld_a{k}) != 1) {{\n            return 1;\n        }}\n"));
        } else {
            s.push_str(&format!(
                "        for (i = 0; i < {}; ++i) {{\n            if (scanf(\"%lf\", &ld_a{k}[i]) != 1) {{\n                return 1;\n            }}\n        }}\n",
                v.size
            ));
        }
        call.push(format!("ld_a{k}"));
    }
    let r = lir.ret_len();
    s.push_str(&format!(
        "        for (i = 0; i < {r}; ++i) {{\n            ld_ret[i] = 0.0;\n        }}\n"
    ));
    s.push_str(&format!("        {}({});\n", lir.name, call.join(", ")));
    s.push_str(&format!(
        "        for (i = 0; i < {r}; ++i) {{\n            printf(i ? \" %.17g\" : \"%.17g\", ld_ret[i]);\n        }}\n"
    ));
    s.push_str("        printf(\"\\n\");\n    }\n    return 0;\n}\n");
    s
}

/// Emits, compiles and links the program with the strict flag set.
pub fn build_native(lir: &Lir) -> Result<NativeBuild, NativeError> {
    let dir = tempfile::tempdir()?;
    let unit = dir.path().join(format!("{}.c", lir.name));
    let driver = dir.path().join("ld_driver.c");
    let exe = dir.path().join("ld_prog");
    std::fs::write(&unit, emit_c(lir))?;
    std::fs::write(&driver, driver_source(lir))?;
    let cc = compiler();
    let out = Command::new(&cc)
        .args(STRICT_FLAGS)
        .arg("-O2")
        .arg(&unit)
        .arg(&driver)
        .arg("-o")
        .arg(&exe)
        .arg("-lm")
        .output()
        .map_err(|e| NativeError::CompilerMissing {
            cc: cc.clone(),
            message: e.to_string(),
        })?;
    let diagnostics = String::from_utf8_lossy(&out.stderr).into_owned();
    if !out.status.success() {
        return Err(NativeError::CompileFailed(diagnostics));
    }
    Ok(NativeBuild {
        _dir: dir,
        exe,
        diagnostics,
        ret_len: lir.ret_len(),
        arg_lens: lir.args.iter().map(|&a| lir.vars[a].size).collect(),
    })
}

fn parse_out(tok: &str) -> Option<f64> {
    let t = tok.trim_start_matches(['-', '+']);
    if t.eq_ignore_ascii_case("nan") {
        Some(f64::NAN)
    } else {
        tok.parse().ok()
    }
}

impl NativeBuild {
    /// Runs every case (positional arguments) and returns the outputs.
    pub fn run(&self, cases: &[Vec<Vec<f64>>]) -> Result<Vec<Vec<f64>>, NativeError> {
        let mut input = format!("{}\n", cases.len());
        for case in cases {
            if case.len() != self.arg_lens.len()
                || case.iter().zip(&self.arg_lens).any(|(a, &n)| a.len() != n)
            {
                return Err(NativeError::Run(
                    "argument shapes do not match the program".into(),
                ));
            }
            for a in case {
                for x in a {
                    input.push_str(&format!("{x:?} "));
                }
            }
            input.push('\n');
        }
        let mut child = Command::new(&self.exe)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()?;
        let mut stdin = child.stdin.take().expect("stdin is piped");
        let writer = std::thread::spawn(move || stdin.write_all(input.as_bytes()));
        let out = child.wait_with_output()?;
        writer
            .join()
            .map_err(|_| NativeError::Run("writer thread panicked".into()))??;
        if !out.status.success() {
            return Err(NativeError::Run(format!(
                "driver exited with {}",
                out.status
            )));
        }
        let text = String::from_utf8_lossy(&out.stdout);
        let rows: Vec<Vec<f64>> = text
            .lines()
            .map(|l| {
                l.split_whitespace()
                    .map(parse_out)
                    .collect::<Option<Vec<_>>>()
            })
            .collect::<Option<_>>()
            .ok_or_else(|| NativeError::Run("unparseable driver output".into()))?;
        if rows.len() != cases.len() || rows.iter().any(|r| r.len() != self.ret_len) {
            return Err(NativeError::Run(
                "driver printed the wrong number of values".into(),
            ));
        }
        Ok(rows)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codegen::Machine;
    use crate::{compile, CompileOptions};

    #[test]
    fn native_matches_interpreter_on_migration() {
        let src = include_str!("../../corpus/migration.landau");
        let defines = [("N".to_string(), 6), ("k".to_string(), 2)]
            .into_iter()
            .collect();
        let c = compile(src, &CompileOptions { defines }).unwrap();
        let build = match build_native(&c.lir) {
            Ok(b) => b,
            Err(NativeError::CompilerMissing { .. }) => return,
            Err(e) => panic!("{e}\n{}", emit_c(&c.lir)),
        };
        assert!(build.diagnostics.is_empty(), "{}", build.diagnostics);
        let args: Vec<Vec<f64>> = vec![
            (0..36).map(|i| 0.01 * i as f64 + 0.3).collect(),
            (0..6).map(|i| 1.0 / (i as f64 + 1.5)).collect(),
            (0..36)
                .map(|i| if i % 7 == 0 { 1.0 } else { 0.1 })
                .collect(),
        ];
        let native = build.run(std::slice::from_ref(&args)).unwrap();
        let refs: Vec<&[f64]> = args.iter().map(Vec::as_slice).collect();
        let interp = Machine::new(&c.lir).run_args(&refs);
        assert_eq!(native[0], interp);
    }
}
