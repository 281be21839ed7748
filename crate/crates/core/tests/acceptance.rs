//! Acceptance suite: one PASS/FAIL line per criterion, with its runtime.
//!
//! Exits nonzero when any criterion outside `KNOWN_RED` fails. Criteria in
//! `KNOWN_RED` still print FAIL; see the README for why they stay red.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use kitaev_scars::dynamics::{
    fidelity_series, first_revival, full_diagonalize, random_basis_state, time_grid, Evolver, DEFAULT_DENSE_CEILING,
    DEFAULT_DT, DEFAULT_KRYLOV_DIM, DEFAULT_T_MAX,
};
use kitaev_scars::fsa::{build_ladder, fsa_matrix, fsa_overlay, split_hamiltonian};
use kitaev_scars::hamiltonian::{build_sector_hamiltonian, verify_form_equivalence};
use kitaev_scars::observables::{
    collapse_degenerate, ee_scatter, half_chain, level_statistics, mean_r_ratio, overlap_tower, tower_tops,
    TowerTop,
};
use kitaev_scars::pxpmap::verify_pxp_equivalence;
use kitaev_scars::spinbasis::{build_sector_basis, enumerate_sectors, SectorBasis, SpinConfig};
use kitaev_scars::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Criteria whose FAIL line is expected and documented.
const KNOWN_RED: &[u32] = &[10];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Result<Outcome> {
    Ok(Outcome {
        pass,
        detail: detail.into(),
    })
}

fn sector(unit: &str, n: usize) -> Result<SectorBasis> {
    build_sector_basis(SpinConfig::repeat(unit, n)?)
}

fn special(n: usize) -> Result<SectorBasis> {
    sector("yxy", n)
}

fn default_grid() -> Vec<f64> {
    time_grid(DEFAULT_T_MAX, DEFAULT_DT).expect("default grid")
}

fn sector_completeness() -> Result<Outcome> {
    let mut bad = Vec::new();
    for n in 2..=10usize {
        let total: usize = enumerate_sectors(n)?.values().sum();
        if total != 3usize.pow(n as u32) {
            bad.push(format!("N={n}: {total}"));
        }
    }
    outcome(bad.is_empty(), if bad.is_empty() { "sum = 3^N for N = 2..10".into() } else { bad.join(", ") })
}

/// Words of length `n` with no two cyclically adjacent set bits, counted naively.
fn brute_blockaded(n: usize) -> usize {
    (0u64..1 << n)
        .filter(|w| (0..n).all(|j| !(w >> j & 1 == 1 && w >> ((j + 1) % n) & 1 == 1)))
        .count()
}

fn all_plus(n: usize) -> Result<SectorBasis> {
    if n.is_multiple_of(2) {
        sector("yx", n)
    } else {
        sector("z", n)
    }
}

fn all_plus_dimension() -> Result<Outcome> {
    let d22 = all_plus(22)?.len();
    let mut bad = Vec::new();
    for n in 3..=22 {
        let (bfs, brute) = (all_plus(n)?.len(), brute_blockaded(n));
        if bfs != brute {
            bad.push(format!("N={n}: {bfs} vs {brute}"));
        }
    }
    outcome(
        d22 == 39_603 && bad.is_empty(),
        format!("D(N=22) = {d22}; brute-force blockade counts N=3..22 mismatches: {bad:?}"),
    )
}

fn growth_rate() -> Result<Outcome> {
    let ns = [6usize, 9, 12, 15, 18];
    let pts: Vec<(f64, f64)> = ns
        .iter()
        .map(|&n| Ok((n as f64, (special(n)?.len() as f64).ln())))
        .collect::<Result<_>>()?;
    let m = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
    let (mx, my) = (sx / m, sy / m);
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
        / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    let target = 1.55113f64.ln();
    let rel = slope / target - 1.0;
    outcome(rel.abs() < 0.01, format!("slope {slope:.6} vs ln 1.55113 = {target:.6} ({:+.3}%)", 100.0 * rel))
}

fn pxp_equivalence() -> Result<Outcome> {
    let mut pass = true;
    let mut parts = Vec::new();
    for n in [8, 10, 12] {
        let r = verify_pxp_equivalence(n, DEFAULT_DENSE_CEILING)?;
        let dev = r.max_spectral_deviation.unwrap_or(f64::INFINITY);
        pass &= r.intertwining_violations == 0 && dev < 1e-10;
        parts.push(format!("N={n}: dim {} violations {} dev {dev:.1e}", r.dim_kitaev, r.intertwining_violations));
    }
    outcome(pass, parts.join("; "))
}

fn form_equivalence() -> Result<Outcome> {
    let mut pass = true;
    let mut parts = Vec::new();
    for n in [4, 6] {
        let r = verify_form_equivalence(n)?;
        pass &= r.max_deviation < 1e-10;
        parts.push(format!("N={n}: dev {:.1e}", r.max_deviation));
    }
    outcome(pass, parts.join("; "))
}

fn first_peak(unit: &str, n: usize) -> Result<(f64, f64)> {
    let basis = sector(unit, n)?;
    let h = build_sector_hamiltonian(&basis)?;
    let ev = Evolver::krylov(&h, DEFAULT_KRYLOV_DIM)?;
    let f = fidelity_series(&ev, &basis, &SpinConfig::repeat(unit, n)?, &default_grid())?;
    Ok(first_revival(&f).map_or((f64::NAN, 0.0), |p| (p.time, p.value)))
}

fn scar_revival() -> Result<Outcome> {
    let (t_s, f_s) = first_peak("yxy", 18)?;
    let (t_z, f_z) = first_peak("yx", 18)?;
    outcome(
        f_s > 0.7 && f_s > f_z,
        format!("N=18 first peak |yxy> {f_s:.4} at t={t_s:.2}; |Z2> {f_z:.4} at t={t_z:.2}"),
    )
}

/// Seed of the random product state; the choice is recorded with the results.
const RANDOM_SEED: u64 = 0;

fn thermal_contrast() -> Result<Outcome> {
    let basis = special(18)?;
    let h = build_sector_hamiltonian(&basis)?;
    let ev = Evolver::krylov(&h, DEFAULT_KRYLOV_DIM)?;
    let init = random_basis_state(&basis, RANDOM_SEED);
    let f = fidelity_series(&ev, &basis, &init, &default_grid())?;
    let worst = f.max_in(5.0, 40.0).unwrap_or(f64::NAN);
    outcome(worst < 0.1, format!("seed {RANDOM_SEED} -> |{init}>, max F on [5,40] = {worst:.4}"))
}

fn krylov_vs_dense() -> Result<Outcome> {
    let basis = special(12)?;
    let h = build_sector_hamiltonian(&basis)?;
    let root = SpinConfig::repeat("yxy", 12)?;
    let grid = default_grid();
    let dense = fidelity_series(&Evolver::dense(&h, DEFAULT_DENSE_CEILING)?, &basis, &root, &grid)?;
    let kry = fidelity_series(&Evolver::krylov(&h, DEFAULT_KRYLOV_DIM)?, &basis, &root, &grid)?;
    let dev = dense
        .values
        .iter()
        .zip(&kry.values)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    outcome(dev < 1e-8, format!("N=12 max |F_krylov - F_dense| = {dev:.2e} over {} points", grid.len()))
}

fn fsa_closure() -> Result<Outcome> {
    let mut pass = true;
    let mut parts = Vec::new();
    for n in [6, 9, 12] {
        let basis = special(n)?;
        let root = SpinConfig::repeat("yxy", n)?;
        let ladder = build_ladder(&basis, &root)?;
        let endpoint = ladder.endpoint(&basis);
        let antipode = SpinConfig::repeat("xyx", n)?;
        let betas_ok = ladder.betas.iter().all(|&b| b > 0.0);

        let split = split_hamiltonian(&basis, &root)?;
        let mut halves: Vec<(u32, u32, bool)> = split.forward.transitions().to_vec();
        halves.extend_from_slice(split.backward.transitions());
        halves.sort_unstable();
        let h = build_sector_hamiltonian(&basis)?;
        let mut full: Vec<(u32, u32, bool)> = h
            .entries()
            .iter()
            .flat_map(|e| [(e.col, e.row, e.negative), (e.row, e.col, e.negative)])
            .collect();
        full.sort_unstable();
        let exact = halves == full;

        pass &= ladder.len() == n + 1 && ladder.closed && endpoint == Some(antipode) && betas_ok && exact;
        parts.push(format!(
            "N={n}: {} vectors, endpoint {}, betas>0 {betas_ok}, H+ + H- = H {exact}",
            ladder.len(),
            endpoint.map_or("none".into(), |c| c.to_string())
        ));
    }
    outcome(pass, parts.join("; "))
}

struct Overlay {
    fsa: Vec<(f64, f64)>,
    tops: Vec<TowerTop>,
}

/// FSA points and the N+1 exact tower tops in bins of the FSA level spacing,
/// with degenerate levels merged into their eigenspace weight.
fn overlay(unit: &str, n: usize) -> Result<Overlay> {
    let basis = sector(unit, n)?;
    let root = SpinConfig::repeat(unit, n)?;
    let h = build_sector_hamiltonian(&basis)?;
    let spectrum = full_diagonalize(&h, DEFAULT_DENSE_CEILING)?;
    let ladder = build_ladder(&basis, &root)?;
    let matrix = fsa_matrix(&ladder);
    let fsa: Vec<(f64, f64)> = fsa_overlay(&ladder, &matrix, &spectrum, &basis, &root)?
        .into_iter()
        .map(|p| (p.energy, p.overlap))
        .collect();
    let tower = collapse_degenerate(&overlap_tower(&spectrum, &basis, &root)?);
    let tops = tower_tops(&tower, fsa[0].0, matrix.mean_spacing())?
        .into_iter()
        .filter(|t| (0..=n as i64).contains(&t.bin))
        .collect();
    Ok(Overlay { fsa, tops })
}

fn nearest(tops: &[TowerTop], e: f64) -> TowerTop {
    *tops
        .iter()
        .min_by(|a, b| (a.energy - e).abs().total_cmp(&(b.energy - e).abs()))
        .expect("nonempty tower")
}

fn fsa_overlay_quality() -> Result<Outcome> {
    let s = overlay("yxy", 12)?;
    let gap = (s.tops.last().unwrap().energy - s.tops[0].energy) / (s.tops.len() - 1) as f64;
    let worst_shift = s
        .fsa
        .iter()
        .map(|&(e, _)| (nearest(&s.tops, e).energy - e).abs())
        .fold(0.0, f64::max);
    let matched = worst_shift < gap / 2.0;

    let y = overlay("yyxx", 12)?;
    let ratio = y
        .fsa
        .iter()
        .map(|&(e, o)| o / nearest(&y.tops, e).overlap)
        .fold(0.0, f64::max);
    outcome(
        matched && ratio >= 2.0,
        format!(
            "yxy N=12: worst |E_fsa - E_top| {worst_shift:.4} vs half gap {:.4}; \
             yyxx N=12: largest FSA/exact overlap ratio {ratio:.3} (needs >= 2)",
            gap / 2.0
        ),
    )
}

fn entropy_invariants() -> Result<Outcome> {
    let n = 12;
    let basis = special(n)?;
    let cut = half_chain(&basis)?;
    let mut product_max = 0.0f64;
    for i in 0..basis.len() {
        let mut v = vec![0.0; basis.len()];
        v[i] = 1.0;
        product_max = product_max.max(cut.entropy_real(&v)?);
    }
    let h = build_sector_hamiltonian(&basis)?;
    let spectrum = full_diagonalize(&h, DEFAULT_DENSE_CEILING)?;
    let scatter = ee_scatter(&spectrum, &basis)?;
    let bound = (n / 2) as f64 * 3f64.ln();
    let s_max = scatter.iter().map(|p| p.entropy).fold(0.0, f64::max);
    // Mid-spectrum: the central tenth of the bandwidth.
    let (lo, hi) = (spectrum.energies[0], spectrum.energies[spectrum.dim() - 1]);
    let (centre, half_width) = ((lo + hi) / 2.0, 0.05 * (hi - lo));
    let mid: Vec<f64> = scatter
        .iter()
        .filter(|p| (p.key - centre).abs() <= half_width)
        .map(|p| p.entropy)
        .collect();
    let mid_mean = mid.iter().sum::<f64>() / mid.len() as f64;
    let outliers = scatter.iter().filter(|p| p.entropy < 0.5 * mid_mean).count();
    let s_min = scatter.iter().map(|p| p.entropy).fold(f64::INFINITY, f64::min);
    outcome(
        product_max < 1e-12 && s_max <= bound + 1e-9 && outliers > 0,
        format!(
            "N=12: product-state max S {product_max:.1e}; max eigenstate S {s_max:.4} <= {bound:.4}; \
             mid-spectrum mean {mid_mean:.4} over {} states, {outliers} below half (lowest {s_min:.4})",
            mid.len()
        ),
    )
}

fn level_statistics_check() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut e = 0.0;
    let levels: Vec<f64> = (0..100_000)
        .map(|_| {
            e += -(1.0 - rng.gen::<f64>()).ln();
            e
        })
        .collect();
    let poisson = mean_r_ratio(&[levels]).unwrap_or(f64::NAN);
    let basis = special(15)?;
    let h = build_sector_hamiltonian(&basis)?;
    let stats = level_statistics(&h, &basis, None, true, DEFAULT_DENSE_CEILING)?;
    outcome(
        (poisson - 0.386).abs() <= 0.01 && stats.mean_r > 0.42,
        format!(
            "Poisson oracle <r> = {poisson:.4}; special sector N=15 momentum-resolved <r> = {:.4} ({} blocks, {} levels)",
            stats.mean_r, stats.n_blocks, stats.n_levels
        ),
    )
}

type Check = fn() -> Result<Outcome>;

fn main() -> ExitCode {
    let criteria: [(u32, &str, Check, u64); 12] = [
        (1, "sector completeness", sector_completeness, 60),
        (2, "all-plus dimension", all_plus_dimension, 60),
        (3, "growth rate", growth_rate, 60),
        (4, "PXP equivalence", pxp_equivalence, 300),
        (5, "form equivalence", form_equivalence, 120),
        (6, "scar revival", scar_revival, 600),
        (7, "thermal contrast", thermal_contrast, 600),
        (8, "Krylov fidelity", krylov_vs_dense, 300),
        (9, "FSA closure", fsa_closure, 120),
        (10, "FSA overlay quality", fsa_overlay_quality, 300),
        (11, "entropy invariants", entropy_invariants, 300),
        (12, "level statistics", level_statistics_check, 300),
    ];
    let mut unexpected = Vec::new();
    let mut passed = 0;
    for (id, name, check, budget) in criteria {
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let in_time = elapsed <= Duration::from_secs(budget);
        let (pass, detail) = match result {
            Ok(o) => (o.pass && in_time, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        let timing = format!("{:.1}s of {budget}s", elapsed.as_secs_f64());
        println!(
            "{} {id:>2} {name}: {detail} [{timing}]",
            if pass { "PASS" } else { "FAIL" }
        );
        if pass {
            passed += 1;
        } else if !KNOWN_RED.contains(&id) {
            unexpected.push(id);
        }
    }
    println!("acceptance: {passed}/12 pass; known red {KNOWN_RED:?}; unexpected failures {unexpected:?}");
    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
