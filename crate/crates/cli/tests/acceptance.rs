//! Acceptance run: one PASS/FAIL line per criterion, followed by the
//! individual checks behind it.

use std::process::ExitCode;

use effcap_cli::validation::{run_suite, Check, Options, Status, Suite};

const CRITERIA: [(u8, &str); 10] = [
    (1, "minimum bit energy, single antenna"),
    (2, "minimum bit energy, 2x5"),
    (3, "i.i.d. trace moment identities"),
    (4, "low-SNR derivatives against finite differences"),
    (5, "wideband slope against bit-energy secant"),
    (6, "Hankel MGF against Monte Carlo and incomplete Gamma"),
    (7, "high-SNR slopes and power offset"),
    (8, "sparse wideband minimum bit energy"),
    (9, "queue tail exponent"),
    (10, "determinism across worker counts"),
];

fn main() -> ExitCode {
    let checks = match run_suite(Suite::All, &Options::default()) {
        Ok(c) => c,
        Err(e) => {
            println!("FAIL acceptance run aborted: {e}");
            return ExitCode::FAILURE;
        }
    };
    let mut all_pass = true;
    for (id, title) in CRITERIA {
        let mine: Vec<&Check> = checks.iter().filter(|c| c.criterion == Some(id)).collect();
        let pass = !mine.is_empty() && mine.iter().all(|c| c.status != Status::Fail);
        all_pass &= pass;
        println!("{} criterion {id}: {title}", if pass { "PASS" } else { "FAIL" });
        for c in mine {
            println!("    {}", c.line());
        }
    }
    println!("supporting checks:");
    for c in checks.iter().filter(|c| c.criterion.is_none()) {
        all_pass &= !c.failed();
        println!("    {}", c.line());
    }
    if all_pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
