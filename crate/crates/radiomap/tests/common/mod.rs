#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

/// Deterministic raw log: `reps` jittered samples per waypoint on a lattice
/// with `step` spacing, throughput following a smooth field plus noise.
pub fn synthetic_raw_csv(nx: usize, ny: usize, step: f64, reps: usize) -> String {
    let mut out = String::from("pos_x,pos_y,time_s,dl_mbps,sinr_db\n");
    let mut state: u64 = 0x9e37_79b9_7f4a_7c15;
    let mut uniform = move || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    let mut t = 0.0;
    for j in 0..ny {
        for i in 0..nx {
            let (cx, cy) = (i as f64 * step, j as f64 * step);
            let field = 400.0 + 200.0 * (cx / 3.0).sin() * (cy / 4.0).cos();
            for _ in 0..reps {
                let x = cx + 0.04 * (uniform() - 0.5);
                let y = cy + 0.04 * (uniform() - 0.5);
                let tput = field + 30.0 * (uniform() - 0.5);
                out.push_str(&format!("{x},{y},{t},{tput},{}\n", 20.0 + 5.0 * uniform()));
                t += 0.1;
            }
        }
    }
    out
}

pub const SYNTHETIC_SCHEMA: &str = "x = pos_x\ny = pos_y\ntimestamp = time_s\nthroughput = dl_mbps\nsinr = sinr_db\n";

pub fn bin() -> PathBuf {
    PathBuf::from(env!("CARGO_BIN_EXE_radiomap"))
}

pub fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(bin()).current_dir(dir).args(args).output().expect("spawn radiomap")
}

pub fn run_ok(dir: &Path, args: &[&str]) -> Output {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "radiomap {args:?} failed with {:?}\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}
