//! One line per acceptance criterion; exits non-zero if any fails.
//!
//! Pass `--only 4,5,6` to run a subset.

use rxlin_validation::*;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let only: Option<Vec<u8>> = args
        .iter()
        .position(|a| a == "--only")
        .and_then(|i| args.get(i + 1))
        .map(|list| list.split(',').filter_map(|v| v.trim().parse().ok()).collect());
    let wanted = |id: u8| only.as_ref().is_none_or(|o| o.contains(&id));

    let base = reference_config();
    let jobs: Vec<(u8, Box<dyn Fn() -> Verdict>)> = vec![
        (1, Box::new(|| criterion_1(&base))),
        (2, Box::new(|| criterion_2(&base))),
        (3, Box::new(|| criterion_3(&base))),
        (4, Box::new(criterion_4)),
        (5, Box::new(criterion_5)),
        (6, Box::new(criterion_6)),
        (7, Box::new(|| criterion_7(&base))),
        (8, Box::new(criterion_8)),
    ];
    let mut failed = Vec::new();
    for (id, job) in jobs {
        if !wanted(id) {
            continue;
        }
        let v = job();
        println!("{v}");
        if !v.pass {
            failed.push(v.id);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all criteria passed");
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
