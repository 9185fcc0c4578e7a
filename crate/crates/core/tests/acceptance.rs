//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any failure.
//!
//! Run alone with `cargo test --release --test acceptance`; timing criteria
//! are meaningful only in release builds on an otherwise idle machine.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use clap::Parser;
use stabgs::annealer::{anneal, AnnealOptions};
use stabgs::cli::{run, Cli};
use stabgs::hamiltonian::{
    cluster_model, gen_random_local, gen_stochastic_heisenberg, rotate_y_supercell, tfim, toric_model, Hamiltonian,
};
use stabgs::oracle::{brute_force_min, dense_expectation, dense_from_group, enumerate_full_groups};
use stabgs::pauli::{parse_pauli, Letter, PauliOp, PauliSet};
use stabgs::rng::Rng;
use stabgs::solver_general::{e_stab, solve_general, GeneralOptions};
use stabgs::solver_local1d::{
    replay_valid_qm, solve_local1d_cached, solve_local1d_detailed, Local1dCache, Local1dOptions, RejectReason,
};
use stabgs::solver_periodic::{
    cell_angles, diagonal_grid, solve_periodic_1d_degenerate, toric_crossing, toric_curvature_flip,
    toric_polarized_energy, toric_scan, SupercellCache,
};
use stabgs::stabgroup::{MemberSign, StabGroup};

const TOL_DENSE: f64 = 1e-10;
const TOL_IDENTITY: f64 = 1e-12;
const TOL_CLOSED_FORM: f64 = 1e-9;
const TOL_CROSSING: f64 = 0.01;
const TOL_FLIP: f64 = 0.01;
const MIN_R2: f64 = 0.98;
const MAX_SITE_SPREAD: f64 = 2.0;
const TORUS: [usize; 2] = [3, 3];

const CLUSTER: &str = "+X0 Z1 X2";
const POLARIZED: &str = "-Y0";
const FERRO: &str = "+Y0 Y1";
// the two period-3 sets at the tricritical point, written from the
// translation that minimizes the serialization
const TRI_A: &str = "+X0 Z1 X2; +Y0 Y1; +Y1 Y2";
const TRI_B: &str = "+X0 Z1 X2; +X1 Z2 X3; +Y1 Y2";

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn ham(n: usize, terms: &[(f64, &str)]) -> Hamiltonian {
    Hamiltonian::new(n, terms.iter().map(|&(w, t)| (w, parse_pauli(t, n).unwrap()))).unwrap()
}

fn group(n: usize, gens: &[&str]) -> StabGroup {
    let ops: Vec<PauliOp> = gens.iter().map(|g| parse_pauli(g, n).unwrap()).collect();
    StabGroup::from_generators(n, ops.iter()).unwrap()
}

fn cli_stdout(args: &[&str]) -> String {
    let mut argv = vec!["stabgs"];
    argv.extend_from_slice(args);
    let cli = Cli::try_parse_from(argv).expect("valid arguments");
    run(&cli).unwrap_or_else(|e| panic!("command failed with exit code {}", e.code())).stdout
}

fn oracle_instances() -> Vec<Hamiltonian> {
    let mut v = Vec::new();
    for (n, k) in [(2, 2), (3, 2), (3, 3)] {
        for seed in 0..50u64 {
            v.push(gen_random_local(n, k, 6, 1000 * n as u64 + 100 * k as u64 + seed));
        }
    }
    v
}

fn c1_oracle_exactness() -> Outcome {
    let mut bad = 0;
    let inst = oracle_instances();
    for h in &inst {
        let a = solve_local1d_detailed(h, &Local1dOptions::default()).result.energy;
        let b = solve_general(h, &GeneralOptions::default()).unwrap().energy;
        let c = brute_force_min(h).unwrap();
        if a != b || b != c {
            bad += 1;
        }
    }
    outcome(bad == 0, format!("{} instances over (n,k) in {{(2,2),(3,2),(3,3)}}, {} mismatches (exact equality)", inst.len(), bad))
}

fn c2_counting() -> Outcome {
    let counts: Vec<usize> = (1..=3).map(|n| enumerate_full_groups(n).unwrap().len()).collect();
    outcome(counts == [6, 60, 1080], format!("counts {:?}, expected [6, 60, 1080]", counts))
}

fn c3_energy_identity() -> Outcome {
    let groups = enumerate_full_groups(2).unwrap();
    let mut worst: f64 = 0.0;
    for seed in 0..10u64 {
        let h = gen_random_local(2, 2, 8, 77 + seed);
        for g in &groups {
            let d = dense_expectation(&h, &dense_from_group(g).unwrap());
            worst = worst.max((d - e_stab(&h, g)).abs());
        }
    }
    outcome(worst <= TOL_DENSE, format!("{} groups x 10 Hamiltonians, max deviation {:.2e} (tol {:.0e})", groups.len(), worst, TOL_DENSE))
}

fn c4_cluster_phases() -> Outcome {
    let csv = cli_stdout(&["sweep", "--model", "cluster", "--grid", "J:0:2:21,h:0:2:21", "--cmax", "6"]);
    let mut sigs = BTreeSet::new();
    let mut bulk_sigs = BTreeSet::new();
    let mut wrong = Vec::new();
    let mut rows = 0;
    for (idx, line) in csv.lines().skip(1).enumerate() {
        rows += 1;
        let f: Vec<&str> = line.splitn(5, ',').collect();
        let (i, j) = (idx / 21, idx % 21);
        let sig = f[4];
        sigs.insert(sig.to_string());
        // grid values are i / 10 and j / 10
        let allowed: Vec<&str> = if i + j < 10 {
            vec![CLUSTER]
        } else if i + j == 10 {
            if j == 0 { vec![CLUSTER, FERRO] } else { vec![CLUSTER, POLARIZED] }
        } else if j == 0 {
            vec![FERRO]
        } else {
            vec![POLARIZED]
        };
        if i + j != 10 {
            bulk_sigs.insert(sig.to_string());
        }
        if !allowed.contains(&sig) {
            wrong.push(format!("({},{}):{}", f[0], f[1], sig));
        }
    }
    let (deg, truncated) = solve_periodic_1d_degenerate(&cluster_model(1.0, 0.0), 6, &Local1dCache::new()).unwrap();
    let tri: Vec<&str> = deg.iter().map(|r| r.phase_signature.as_str()).collect();
    let tri_ok = !truncated && deg.len() >= 4 && tri.contains(&TRI_A) && tri.contains(&TRI_B);
    let pass = rows == 441 && wrong.is_empty() && bulk_sigs.len() == 3 && tri_ok;
    outcome(
        pass,
        format!(
            "{} rows, {} bulk signatures {:?}, {} off-predicate points {:?}; tricritical: {} degenerate phases, both period-3 sets {}",
            rows,
            bulk_sigs.len(),
            bulk_sigs,
            wrong.len(),
            wrong.iter().take(5).collect::<Vec<_>>(),
            deg.len(),
            if tri_ok { "present" } else { "MISSING" }
        ),
    )
}

fn c5_toric_scan() -> Outcome {
    let cache = SupercellCache::new();
    let grid = diagonal_grid(1e-3);
    let crossing = toric_crossing(TORUS, &grid, 0.0, 1.0, 1e-4, &cache).unwrap();
    let flip = toric_curvature_flip(TORUS, 1e-3, 1.0, 2.0, 1e-4, &cache).unwrap();
    // polarized branch at every grid point. With the rotation used here a
    // field-aligned product state at angle alpha is all-X in the rotated frame.
    let mut worst: f64 = 0.0;
    let mut above = 0;
    for h in [0.3, 1.0, 1.8] {
        let model = toric_model(h, h, TORUS);
        let n = model.n_qubits();
        let xs: Vec<PauliOp> = (0..n).map(|q| PauliOp::single(n, q, Letter::X)).collect();
        let aligned = StabGroup::from_generators(n, xs.iter()).unwrap();
        let scan = toric_scan(h, TORUS, &grid, &cache).unwrap();
        for p in &scan.points {
            let rotated = rotate_y_supercell(&model, &cell_angles(&model, p.alpha, p.beta)).to_torus().unwrap();
            let branch = e_stab(&rotated, &aligned) / n as f64;
            worst = worst.max((branch - toric_polarized_energy(h, p.alpha)).abs());
            if p.result.e_per_site > branch + TOL_CLOSED_FORM {
                above += 1;
            }
        }
    }
    let pass = (crossing - 0.46).abs() <= TOL_CROSSING
        && (flip - std::f64::consts::SQRT_2).abs() <= TOL_FLIP
        && worst <= TOL_CLOSED_FORM
        && above == 0;
    outcome(
        pass,
        format!(
            "crossing h = {:.5} (0.46 +- {}), curvature flip h = {:.5} (sqrt 2 +- {}), closed-form max deviation {:.2e} over {} points x 3 fields, {} scan minima above the branch",
            crossing,
            TOL_CROSSING,
            flip,
            TOL_FLIP,
            worst,
            grid.len(),
            above
        ),
    )
}

fn c6_annealing() -> Outcome {
    let mut violations = 0;
    let mut ratios = Vec::new();
    let mut report = Vec::new();
    for n in [4usize, 8, 12] {
        let cache = Local1dCache::new();
        let (mut sum, mut exact) = (0.0, 0);
        for seed in 0..100u64 {
            let h = gen_stochastic_heisenberg(n, 4, seed, true);
            let e = solve_local1d_cached(&h, &Local1dOptions::default(), &cache).result.energy;
            let a = anneal(&h, &AnnealOptions::default(), seed).best_energy;
            if a < e - 1e-12 * (1.0 + e.abs()) {
                violations += 1;
            }
            if (a - e).abs() <= 1e-9 * (1.0 + e.abs()) {
                exact += 1;
            }
            sum += a / e;
        }
        ratios.push(sum / 100.0);
        report.push(format!("n={}: mean ratio {:.4}, exact {}/100", n, sum / 100.0, exact));
    }
    let monotone = ratios.windows(2).all(|w| w[1] <= w[0]);
    outcome(violations == 0 && monotone, format!("{}; {} runs below exact", report.join("; "), violations))
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) }
}

fn cold_run(h: &Hamiltonian) -> (f64, Vec<f64>) {
    let t = Instant::now();
    let out = solve_local1d_cached(h, &Local1dOptions { cold_sites: true, ..Default::default() }, &Local1dCache::new());
    (t.elapsed().as_secs_f64(), out.stats.iter().map(|s| s.seconds).collect())
}

fn c7_scaling() -> Outcome {
    // sizes are interleaved round by round so slow drift in machine speed
    // lands on every n alike
    const ROUNDS: usize = 5;
    let ns = [50usize, 100, 150, 200];
    let hams: Vec<Hamiltonian> = ns.iter().map(|&n| gen_stochastic_heisenberg(n, 3, 1, true)).collect();
    let mut runs: Vec<Vec<(f64, Vec<f64>)>> = vec![Vec::new(); ns.len()];
    for _ in 0..ROUNDS {
        for (i, h) in hams.iter().enumerate() {
            runs[i].push(cold_run(h));
        }
    }
    let totals: Vec<f64> = runs.iter().map(|r| median(r.iter().map(|x| x.0).collect())).collect();
    let last = &runs[ns.len() - 1];
    let n = ns[ns.len() - 1];
    // interior cursors, away from the chain ends
    let per_site: Vec<f64> = (4..=n - 4).map(|m| median(last.iter().map(|r| r.1[m]).collect())).collect();
    let spread = per_site.iter().cloned().fold(0.0, f64::max) / median(per_site);
    let xs: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / 4.0, totals.iter().sum::<f64>() / 4.0);
    let sxy: f64 = xs.iter().zip(&totals).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = totals.iter().map(|y| (y - my).powi(2)).sum();
    let r2 = sxy * sxy / (sxx * syy);
    let mut max_site = Vec::new();
    for k in [2usize, 3, 4] {
        let (_, sites) = cold_run(&gen_stochastic_heisenberg(8, k, 1, true));
        max_site.push(sites.iter().cloned().fold(0.0, f64::max));
    }
    let increasing = max_site.windows(2).all(|w| w[1] > w[0]);
    outcome(
        r2 >= MIN_R2 && spread <= MAX_SITE_SPREAD && increasing,
        format!(
            "totals {:?} s (median of {} interleaved rounds), R^2 = {:.4} (>= {}); interior max/median = {:.2} (<= {}); max site time k=2,3,4: {:?} s",
            totals.iter().map(|t| (t * 1000.0).round() / 1000.0).collect::<Vec<_>>(),
            ROUNDS,
            r2,
            MIN_R2,
            spread,
            MAX_SITE_SPREAD,
            max_site.iter().map(|t| (t * 1e5).round() / 1e5).collect::<Vec<_>>()
        ),
    )
}

fn c8_counterexample() -> Outcome {
    let h = ham(3, &[(-1.0, "X0"), (-1.0, "X0 X1"), (-1.0, "X1 X2"), (-1.0, "X2")]);
    let out = solve_local1d_detailed(&h, &Local1dOptions { trace: true, ..Default::default() });
    let energy_ok = out.result.energy == -4.0 && out.result.group == group(3, &["X0", "X1", "X2"]);
    // the naive choice is not closed: its group also contains X0 X1
    let naive: PauliSet = ["X0", "X1 X2", "X2"].iter().map(|t| parse_pauli(t, 3).unwrap()).collect();
    let naive_open = StabGroup::from_set(3, &naive).unwrap().intersect_with_set(&h.signed_terms()).len() != naive.len();
    // after X0 at the first site and nothing at the second, a right group with X on the middle site is refused
    let frame_x = group(2, &["X0", "X1"]);
    let rejected = out.rejects.iter().any(|r| {
        r.m == 2
            && r.reason == RejectReason::RightConsistency
            && r.candidate == frame_x
            && r.from.s_right.is_trivial()
            && r.from.s_proj.to_texts() == vec!["+X0"]
    });
    outcome(
        energy_ok && naive_open && rejected,
        format!(
            "E = {}, group {:?}; naive set closed: {}; consistency rejection recorded: {}",
            out.result.energy,
            out.result.group.to_texts(),
            !naive_open,
            rejected
        ),
    )
}

fn closed(h: &Hamiltonian, chosen: &PauliSet) -> bool {
    let g = StabGroup::from_set(h.n_sites(), chosen).unwrap();
    let back = g.intersect_with_set(&h.signed_terms());
    back.len() == chosen.len() && chosen.iter().all(|p| back.contains(p))
}

fn c9_invariants() -> Outcome {
    let mut corpus = oracle_instances();
    for seed in 0..10 {
        corpus.push(gen_stochastic_heisenberg(8, 3, seed, true));
        corpus.push(gen_stochastic_heisenberg(8, 2, seed, false));
        corpus.push(gen_random_local(6, 3, 12, 500 + seed));
    }
    for g in [0.0, 0.5, 1.0, 2.0] {
        corpus.push(tfim(10, g));
    }
    for (jy, hy) in [(0.5, 0.3), (1.0, 0.0), (2.0, 0.5)] {
        corpus.push(cluster_model(jy, hy).to_open_chain(9));
    }
    let mut failures = 0;
    let mut results = 0;
    for h in &corpus {
        let out = solve_local1d_detailed(h, &Local1dOptions::default());
        results += 1;
        if !closed(h, &out.result.chosen_terms) || replay_valid_qm(h, &out.committed_by_site).is_err() {
            failures += 1;
        }
        if h.terms().len() <= 24 {
            results += 1;
            let g = solve_general(h, &GeneralOptions::default()).unwrap();
            if !closed(h, &g.chosen_terms) {
                failures += 1;
            }
        }
    }
    // 2 E = E+ + E- for a partial group and a commuting operator outside it
    let fulls = enumerate_full_groups(3).unwrap();
    let mut rng = Rng::new(9);
    let (mut probes, mut worst) = (0, 0.0f64);
    while probes < 200 {
        let full = &fulls[rng.below(fulls.len())];
        let keep = rng.below(3);
        let s = StabGroup::from_generators(3, full.generators()[..keep].iter()).unwrap();
        let letters: Vec<(usize, Letter)> =
            (0..3).map(|q| (q, [Letter::I, Letter::X, Letter::Y, Letter::Z][rng.below(4)])).filter(|l| l.1 != Letter::I).collect();
        let p = PauliOp::from_letters(3, &letters, false).unwrap();
        if p.is_identity() || !s.commutes_with(&p) || s.member_sign(&p) != MemberSign::Absent {
            continue;
        }
        let h = gen_random_local(3, 3, 10, 3000 + probes as u64);
        let (plus, minus) = (s.extend(&p).unwrap(), s.extend(&p.negated()).unwrap());
        worst = worst.max((e_stab(&h, &plus) + e_stab(&h, &minus) - 2.0 * e_stab(&h, &s)).abs());
        probes += 1;
    }
    outcome(
        failures == 0 && worst <= TOL_IDENTITY,
        format!(
            "{} results from {} Hamiltonians, {} closure/replay failures; {} probes, max |E+ + E- - 2E| = {:.2e} (tol {:.0e})",
            results,
            corpus.len(),
            failures,
            probes,
            worst,
            TOL_IDENTITY
        ),
    )
}

fn main() {
    let criteria: Vec<(&str, f64, fn() -> Outcome)> = vec![
        ("oracle exactness", 60.0, c1_oracle_exactness),
        ("stabilizer-state counting", 30.0, c2_counting),
        ("energy identity", 30.0, c3_energy_identity),
        ("cluster phase diagram", 300.0, c4_cluster_phases),
        ("toric extended scan", 300.0, c5_toric_scan),
        ("annealing dominance and degradation", 600.0, c6_annealing),
        ("linear scaling", 900.0, c7_scaling),
        ("closure counterexample", 30.0, c8_counterexample),
        ("closure and validity invariants", 300.0, c9_invariants),
    ];
    let only: Option<usize> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|s| s.parse().ok());
    let mut failed = Vec::new();
    let mut summary = BTreeMap::new();
    for (i, (name, limit, f)) in criteria.iter().enumerate() {
        let id = i + 1;
        if only.is_some_and(|o| o != id) {
            continue;
        }
        let t = Instant::now();
        let r = f();
        let secs = t.elapsed().as_secs_f64();
        let pass = r.pass && secs < *limit;
        println!(
            "criterion {} [{}] {}: {} ({:.1} s, limit {} s)",
            id,
            if pass { "PASS" } else { "FAIL" },
            name,
            r.detail,
            secs,
            limit
        );
        summary.insert(id, pass);
        if !pass {
            failed.push(id);
        }
    }
    println!("acceptance: {}/{} passed", summary.values().filter(|&&p| p).count(), summary.len());
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
