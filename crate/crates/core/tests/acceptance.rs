//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use cocoon_core::bifurcation::{
    complex_count, find_critical_g, quartet_grouping, union_spectrum, CriticalSearch, Direction,
};
use cocoon_core::cli::run_cli_with;
use cocoon_core::eigen::{charpoly_roots_oracle, complex_eigenvalues_via_real_embedding, eigenvalues, match_multisets, DEFAULT_TOL};
use cocoon_core::operator::{build_2d_hofstadter_matrix, build_harper_matrix, Boundary, OperatorSpec, PotentialKind};
use cocoon_core::sweep::{distinct_momenta, flux_sweep, full_range, spectrum_for, FluxSweep};
use cocoon_core::symmetry::{
    random_grid, state_diagnostics, verify_conjugation_closure, verify_energy_negation, verify_flux_periodicity,
    verify_flux_reflection, verify_g_reflection,
};
use cocoon_core::Result;

/// Golden thresholds for the conjugation order parameter.
const ETA_REAL_MAX: f64 = 1e-8;
const ETA_COMPLEX_MIN: f64 = 1e-3;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { pass, detail })
}

fn uniform(rng: &mut ChaCha20Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
}

fn below(rng: &mut ChaCha20Rng, n: usize) -> usize {
    (rng.next_u64() % n as u64) as usize
}

fn hermitian_limit() -> Result<Outcome> {
    let start = Instant::now();
    let data = flux_sweep(&FluxSweep::new(50, 0.0).workers(1))?;
    let elapsed = start.elapsed();
    let max_im = data.max_abs_im();
    let max_re = data.points.iter().map(|p| p.re.abs()).fold(0.0, f64::max);
    outcome(
        data.is_complete()
            && data.points.len() == 125_000
            && max_im < 1e-9
            && max_re <= 4.0 + 1e-9
            && elapsed <= Duration::from_secs(300),
        format!(
            "{} eigenvalues, max |Im| {max_im:.1e}, max |Re| {max_re:.12}, {:.1} s",
            data.points.len(),
            elapsed.as_secs_f64()
        ),
    )
}

fn oracle_equivalence() -> Result<Outcome> {
    let start = Instant::now();
    let mut rng = ChaCha20Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for i in 0..200 {
        let l = 3 + below(&mut rng, 6);
        let q = below(&mut rng, l) as i64;
        let p = below(&mut rng, l) as i64;
        let g = 2.0 * uniform(&mut rng) - 1.0;
        let mut spec = OperatorSpec::harper(l, q, p, g)?;
        if i % 4 == 1 {
            spec = spec.with_boundary(Boundary::Open);
        }
        if i % 5 == 2 {
            spec = spec.with_potential(PotentialKind::Random {
                seed: rng.next_u64(),
                width: 2.0,
            });
        }
        let h = build_harper_matrix(&spec)?;
        let a = eigenvalues(&h, DEFAULT_TOL)?;
        let b = charpoly_roots_oracle(&h)?;
        worst = worst.max(match_multisets(&a.eigenvalues, &b.eigenvalues).max_distance);
    }
    let elapsed = start.elapsed();
    outcome(
        worst < 1e-8 && elapsed <= Duration::from_secs(30),
        format!("200 specs, worst distance {worst:.1e}, {:.2} s", elapsed.as_secs_f64()),
    )
}

fn circulant() -> Result<Outcome> {
    let mut worst = 0.0f64;
    let mut cases = 0;
    for l in 3..=50usize {
        for g in [-1.0, -0.5, 0.0, 0.5, 1.0f64] {
            for p in 0..l {
                let spec = OperatorSpec::harper(l, 0, p as i64, g)?;
                let got = spectrum_for(&spec)?;
                let lf = l as f64;
                let want: Vec<Complex64> = (0..l)
                    .map(|j| {
                        let t = 2.0 * std::f64::consts::PI * j as f64 / lf;
                        let k = 2.0 * std::f64::consts::PI * p as f64 / lf;
                        Complex64::new(
                            -2.0 * g.cosh() * t.cos() - 2.0 * k.cos(),
                            -2.0 * g.sinh() * t.sin(),
                        )
                    })
                    .collect();
                worst = worst.max(match_multisets(&got.eigenvalues, &want).max_distance);
                cases += 1;
            }
        }
    }
    outcome(worst < 1e-10, format!("{cases} spectra, worst distance {worst:.1e}"))
}

fn symmetry_suite() -> Result<Outcome> {
    let start = Instant::now();
    let points = random_grid(4, 100, &[4, 6, 10, 50], 1.0)?;
    let mut failures = Vec::new();
    let mut worst = 0.0f64;
    for spec in &points {
        let reports = [
            verify_flux_periodicity(spec)?,
            verify_energy_negation(spec)?,
            verify_flux_reflection(spec)?,
            verify_g_reflection(spec)?,
            verify_conjugation_closure(&spectrum_for(spec)?),
        ];
        for r in reports {
            worst = worst.max(r.max_distance);
            if !r.pass || r.max_distance >= 1e-8 {
                failures.push(r.to_string());
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(
        failures.is_empty() && elapsed <= Duration::from_secs(120),
        format!(
            "{} points x 5 checks, worst distance {worst:.1e}, {} failures{}, {:.2} s",
            points.len(),
            failures.len(),
            failures.first().map(|f| format!(" (first: {f})")).unwrap_or_default(),
            elapsed.as_secs_f64()
        ),
    )
}

fn open_chain_reality() -> Result<Outcome> {
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    let (mut worst_d, mut worst_im) = (0.0f64, 0.0f64);
    for _ in 0..50 {
        let l = 3 + below(&mut rng, 48);
        let q = below(&mut rng, l) as i64;
        let p = below(&mut rng, l) as i64;
        let g = 2.0 * uniform(&mut rng) - 1.0;
        let spec = OperatorSpec::harper(l, q, p, g)?.with_boundary(Boundary::Open);
        let a = spectrum_for(&spec)?;
        let b = spectrum_for(&spec.with_g(0.0))?;
        worst_d = worst_d.max(match_multisets(&a.eigenvalues, &b.eigenvalues).max_distance);
        worst_im = worst_im.max(a.max_abs_im());
    }
    outcome(
        worst_im < 1e-9 && worst_d < 1e-8,
        format!("50 specs, max |Im| {worst_im:.1e}, distance to g = 0 {worst_d:.1e}"),
    )
}

fn first_complexifying(search: &CriticalSearch) -> Result<Option<cocoon_core::bifurcation::BifurcationEvent>> {
    Ok(find_critical_g(search)?
        .into_iter()
        .find(|e| e.direction() == Direction::Complexifying))
}

fn double_pitchfork() -> Result<Outcome> {
    let momenta = distinct_momenta(50, 1, Boundary::Periodic, PotentialKind::Harper);
    let search = CriticalSearch::new(50, 1, momenta.clone(), 0.0, 0.5)?;
    let Some(first) = first_complexifying(&search)? else {
        return outcome(false, "no event on [0, 0.5]".into());
    };
    let halved = search.clone().scan_step(search.scan_step / 2.0);
    let Some(again) = first_complexifying(&halved)? else {
        return outcome(false, "no event with the halved scan step".into());
    };
    let drift = (first.g_critical - again.g_critical).abs();
    let g_above = first.g_critical + 1e-4;
    let union = union_spectrum(&OperatorSpec::harper(50, 1, 0, g_above)?, &momenta)?;
    let count = complex_count(&union, 1e-6);
    let grouping = quartet_grouping(&union.eigenvalues, 50, 1e-6)?;
    outcome(
        first.g_critical > 0.0
            && drift < 1e-6
            && count == 4
            && grouping.quartets.len() == 1
            && grouping.pairs.is_empty()
            && grouping.defects.is_empty(),
        format!(
            "g_c = {:.9}, halved-step drift {drift:.1e}, at g_c + 1e-4: {count} complex, {} quartet(s)",
            first.g_critical,
            grouping.quartets.len()
        ),
    )
}

fn immediate_transition() -> Result<Outcome> {
    let refine = 1e-10;
    let search = CriticalSearch::new(50, 0, full_range(50), 0.0, 0.5)?
        .scan_step(0.01)
        .refine_tol(refine)
        .tol_im(1e-12);
    let Some(first) = first_complexifying(&search)? else {
        return outcome(false, "no event on [0, 0.5]".into());
    };
    outcome(
        first.g_critical < refine,
        format!("g_c = {:.1e} with refine_tol {refine:.0e}", first.g_critical),
    )
}

fn separability() -> Result<Outcome> {
    let mut worst = 0.0f64;
    for l in [4usize, 6] {
        for q in [0i64, 1] {
            for g in [0.0, 0.25] {
                let h2 = build_2d_hofstadter_matrix(l, q, g)?;
                let two_d = complex_eigenvalues_via_real_embedding(&h2, DEFAULT_TOL)?;
                let mut want = Vec::new();
                for p in 0..l {
                    want.extend(spectrum_for(&OperatorSpec::harper(l, q, p as i64, g)?)?.eigenvalues);
                }
                let conj: Vec<Complex64> = want.iter().map(|z| z.conj()).collect();
                want.extend(conj);
                worst = worst.max(match_multisets(&two_d.eigenvalues, &want).max_distance);
            }
        }
    }
    outcome(worst < 1e-8, format!("8 cases, worst distance {worst:.1e}"))
}

fn order_parameter() -> Result<Outcome> {
    let momenta = distinct_momenta(50, 1, Boundary::Periodic, PotentialKind::Harper);
    let search = CriticalSearch::new(50, 1, momenta, 0.0, 0.5)?;
    let Some(event) = first_complexifying(&search)? else {
        return outcome(false, "no event on [0, 0.5]".into());
    };
    let p = event.seed_momentum as i64;
    let below_spec = OperatorSpec::harper(50, 1, p, 0.9 * event.g_lo)?;
    let above_spec = OperatorSpec::harper(50, 1, p, event.g_critical + 1e-4)?;
    let eta_real = state_diagnostics(&below_spec)?
        .iter()
        .filter(|d| d.pair.value.im.abs() < 1e-9)
        .map(|d| d.eta)
        .fold(0.0, f64::max);
    let complex: Vec<f64> = state_diagnostics(&above_spec)?
        .iter()
        .filter(|d| d.pair.value.im.abs() > 1e-6)
        .map(|d| d.eta)
        .collect();
    let eta_complex = complex.iter().copied().fold(f64::INFINITY, f64::min);
    outcome(
        eta_real <= ETA_REAL_MAX
            && complex.len() == event.count_after - event.count_before
            && eta_complex > ETA_COMPLEX_MIN,
        format!(
            "max eta below {eta_real:.1e}, min eta over {} complex states above {eta_complex:.4}",
            complex.len()
        ),
    )
}

fn determinism() -> Result<Outcome> {
    let dir = std::env::temp_dir().join(format!("cocoon-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    let mut outputs = Vec::new();
    for workers in ["1", "8"] {
        let csv = dir.join(format!("w{workers}.csv"));
        let svg = dir.join(format!("w{workers}.svg"));
        let argv = [
            "cocoonlab",
            "butterfly",
            "--L",
            "20",
            "--g",
            "0.3",
            "--workers",
            workers,
            "--out",
            csv.to_str().unwrap(),
            "--svg",
            svg.to_str().unwrap(),
        ];
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = run_cli_with(argv, &mut out, &mut err);
        if code != 0 {
            return outcome(false, format!("exit code {code}: {}", String::from_utf8_lossy(&err)));
        }
        outputs.push((std::fs::read(&csv)?, std::fs::read(&svg)?));
    }
    let _ = std::fs::remove_dir_all(&dir);
    let same = outputs[0] == outputs[1];
    outcome(
        same && !outputs[0].0.is_empty(),
        format!(
            "csv {} bytes, svg {} bytes, identical: {same}",
            outputs[0].0.len(),
            outputs[0].1.len()
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Result<Outcome>); 10] = [
        ("hermitian limit", hermitian_limit),
        ("oracle equivalence", oracle_equivalence),
        ("circulant analytics", circulant),
        ("symmetry suite", symmetry_suite),
        ("open-chain reality", open_chain_reality),
        ("double pitchfork", double_pitchfork),
        ("immediate transition at zero flux", immediate_transition),
        ("2D separability", separability),
        ("conjugation order parameter", order_parameter),
        ("determinism across worker counts", determinism),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let (pass, detail) = match run() {
            Ok(o) => (o.pass, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        println!("{} {:>2} {name}: {detail}", if pass { "PASS" } else { "FAIL" }, i + 1);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
