//! Acceptance suite: one test per criterion, each printing a PASS/FAIL
//! line. Run with `cargo test -p sampler-core --test acceptance`.

use sampler_core::designer::{
    check_feasibility, exhaustive_design, solve_relaxed, solve_sdp, threshold, DesignProblem,
    RoundingRule,
};
use sampler_core::error::Error;
use sampler_core::estimation::{nls_estimate, simulate, EstimationGrid};
use sampler_core::fisher::{aggregate_fim, crlb_diag, weighted_crlb_sum, FimBank};
use sampler_core::models::{CandidateGrid, NoiseSpec, ParamVector, SignalModel};
use sampler_core::scenario::{
    self, crlb_rmse_curve, random_baseline, run_scenario, BaselineSpec, EvalSpec,
};

struct Criterion {
    label: &'static str,
    passed: bool,
    detail: String,
}

impl Criterion {
    fn report(self) {
        println!(
            "{} criterion {}: {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.label,
            self.detail
        );
        assert!(self.passed, "criterion {} failed: {}", self.label, self.detail);
    }
}

fn within(value: f64, target: f64, rel: f64) -> bool {
    (value - target).abs() <= rel * target.abs()
}

/// Criterion 1: 2-D weighted-vs-unweighted bound sums at γ = 50 of 50×50.
#[test]
fn criterion_1_weighted_vs_unweighted_2d() {
    let s = scenario::fig4().unwrap();
    let banks = s.banks().unwrap();
    let model = s.model();
    let gamma = 50.0;

    let run = |psi: Vec<f64>| -> (Vec<usize>, Vec<f64>) {
        let problem = DesignProblem::new(banks.clone(), gamma, psi).unwrap();
        let result = solve_sdp(&problem).unwrap();
        let selected = threshold(&result.weights, RoundingRule::TopM(50)).unwrap();
        let fim = banks[0].subset_fim(&selected).unwrap();
        let crlb = crlb_diag(&fim, 0.0).unwrap();
        (selected, crlb.iter().copied().collect())
    };

    let (_, crlb_all) = run(vec![1.0; 6]);
    let mut psi_w = vec![1.0; 6];
    for i in model.amplitude_indices() {
        psi_w[i] = 0.0;
    }
    for i in model.phase_indices() {
        psi_w[i] = 0.0;
    }
    let (_, crlb_w) = run(psi_w);

    let total_all: f64 = crlb_all.iter().sum();
    let total_w: f64 = crlb_w.iter().sum();
    let subset: Vec<usize> = model
        .frequency_indices()
        .into_iter()
        .chain(model.damping_indices())
        .collect();
    let sub_all: f64 = subset.iter().map(|&p| crlb_all[p]).sum();
    let sub_w: f64 = subset.iter().map(|&p| crlb_w[p]).sum();

    let ok = within(total_all, 2.31e-2, 0.15)
        && within(total_w, 3.61e-2, 0.15)
        && within(sub_all, 6.53e-4, 0.15)
        && within(sub_w, 4.42e-4, 0.15)
        && total_w > total_all
        && sub_w < sub_all;
    Criterion {
        label: "1 (2-D weighted vs unweighted bound sums)",
        passed: ok,
        detail: format!(
            "total_all={total_all:.3e} (2.31e-2±15%), total_weighted={total_w:.3e} \
             (3.61e-2±15%), subset_all={sub_all:.3e} (6.53e-4±15%), \
             subset_weighted={sub_w:.3e} (4.42e-4±15%)"
        ),
    }
    .report();
}

/// Criterion 2: rounded designs within 5% of the exhaustive optimum on
/// N=8, M=3 over 20 random parameter draws.
#[test]
fn criterion_2_exhaustive_oracle_equivalence() {
    let model = SignalModel::damped_1d(1).unwrap();
    let grid = CandidateGrid::uniform_1d(8).unwrap();
    let noise = NoiseSpec::new(0.2).unwrap();
    let psi = vec![1.0; 4];
    let mut state = 0xA5A5_5A5Au64;
    let mut next = move || {
        state = state
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    let mut worst_ratio = 1.0f64;
    for draw in 0..20 {
        let theta = ParamVector::new(
            model,
            vec![
                0.5 + 1.5 * next(),
                0.05 + 0.4 * next(),
                0.05 + 0.25 * next(),
                std::f64::consts::TAU * next(),
            ],
        )
        .unwrap();
        let bank = FimBank::build(&theta, &grid, &noise).unwrap();
        let (_, best) = exhaustive_design(&bank, 3, &psi).unwrap();
        let problem = DesignProblem::new(vec![bank.clone()], 3.0, psi.clone()).unwrap();
        let result = solve_sdp(&problem).unwrap();
        let sel = threshold(&result.weights, RoundingRule::TopM(3)).unwrap();
        let fim = bank.subset_fim(&sel).unwrap();
        let obj = weighted_crlb_sum(&fim, &psi, 0.0).unwrap();
        let ratio = obj / best;
        assert!(
            ratio <= 1.05,
            "draw {draw}: rounded {obj:.4e} vs exhaustive {best:.4e} (ratio {ratio:.4})"
        );
        worst_ratio = worst_ratio.max(ratio);
    }
    Criterion {
        label: "2 (exhaustive-oracle equivalence, N=8 M=3)",
        passed: worst_ratio <= 1.05,
        detail: format!("worst rounded/exhaustive ratio {worst_ratio:.4} over 20 draws (<= 1.05)"),
    }
    .report();
}

/// Criterion 3: the epigraph and direct-trace routes agree to 1e-4.
#[test]
fn criterion_3_sdp_direct_equivalence() {
    let mut state = 0x1234_5678u64;
    let mut next = move || {
        state = state
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    let mut worst_rel = 0.0f64;
    for case in 0..50 {
        let two_d = case % 3 == 2;
        let (theta, grid) = if two_d {
            let model = SignalModel::damped_2d(1).unwrap();
            let side = 5 + (next() * 4.0) as usize; // N ≤ 64
            (
                ParamVector::new(
                    model,
                    vec![
                        0.5 + next(),
                        0.05 + 0.35 * next(),
                        0.05 + 0.35 * next(),
                        0.02 + 0.15 * next(),
                        0.02 + 0.15 * next(),
                        next(),
                    ],
                )
                .unwrap(),
                CandidateGrid::uniform_2d(side, side).unwrap(),
            )
        } else {
            let model = SignalModel::damped_1d(1).unwrap();
            let n = 10 + (next() * 54.0) as usize;
            (
                ParamVector::new(
                    model,
                    vec![
                        0.5 + next(),
                        0.05 + 0.4 * next(),
                        0.02 + 0.2 * next(),
                        next(),
                    ],
                )
                .unwrap(),
                CandidateGrid::uniform_1d(n).unwrap(),
            )
        };
        let noise = NoiseSpec::new(0.05 + 0.3 * next()).unwrap();
        let bank = FimBank::build(&theta, &grid, &noise).unwrap();
        let p = bank.dim();
        let n = bank.len();
        let gamma = (p as f64 + 1.0) + next() * (0.6 * n as f64 - p as f64);
        let problem = DesignProblem::new(vec![bank], gamma, vec![1.0; p]).unwrap();
        let direct = solve_relaxed(&problem).unwrap();
        let epi = solve_sdp(&problem).unwrap();
        let rel = (direct.objective - epi.objective).abs() / direct.objective;
        assert!(
            rel < 1e-4,
            "case {case}: direct {:.6e} vs epigraph {:.6e} (rel {rel:.2e})",
            direct.objective,
            epi.objective
        );
        worst_rel = worst_rel.max(rel);
    }
    Criterion {
        label: "3 (epigraph/direct equivalence, 50 problems)",
        passed: worst_rel < 1e-4,
        detail: format!("worst relative objective gap {worst_rel:.2e} (< 1e-4)"),
    }
    .report();
}

/// Criterion 4: the designed scheme beats the best of 1e4 random subsets
/// for every M ≥ 15 on the 1-D comparison scenario.
#[test]
fn criterion_4_random_baseline_dominance() {
    let s = scenario::fig3().unwrap();
    let report = run_scenario(&s).unwrap();
    let mut detail = String::new();
    let mut ok = true;
    for budget in [15.0, 18.0, 21.0, 25.0] {
        let design = report
            .rows
            .iter()
            .find(|r| r.method == "design" && r.budget == budget)
            .unwrap();
        let random = report
            .rows
            .iter()
            .find(|r| r.method == "random" && r.budget == budget)
            .unwrap();
        let good = design.objective <= random.objective * (1.0 + 1e-9);
        ok &= good;
        detail.push_str(&format!(
            "M={}: design {:.4e} vs random {:.4e}; ",
            design.m, design.objective, random.objective
        ));
    }
    Criterion {
        label: "4 (design dominates 1e4-trial random baseline for M >= 15)",
        passed: ok,
        detail,
    }
    .report();
}

/// Criterion 5: NLS error matches the designed bounds (ratio in
/// [0.9, 1.3]) for frequency and damping subsets, weighted and unweighted,
/// and the weighted designs' subset bounds are strictly smaller.
#[test]
fn criterion_5_crlb_tightness_two_sinusoids() {
    let s = scenario::fig5_6().unwrap();
    let report = crlb_rmse_curve(&s).unwrap();
    let mut ok = true;
    let mut detail = String::new();
    for budget in [20.0, 30.0, 40.0] {
        let weighted = report
            .rows
            .iter()
            .find(|r| r.method == "design_weighted" && r.budget == budget)
            .unwrap();
        let unweighted = report
            .rows
            .iter()
            .find(|r| r.method == "design_unweighted" && r.budget == budget)
            .unwrap();
        for subset in ["frequency", "damping"] {
            for row in [weighted, unweighted] {
                let stat = row.subsets.iter().find(|x| x.name == subset).unwrap();
                let ratio = stat.rmse.unwrap() / stat.root_crlb_worst;
                let good = (0.9..=1.3).contains(&ratio);
                ok &= good;
                detail.push_str(&format!(
                    "M={} {} {}: rmse/bound {:.3}; ",
                    row.m, row.method, subset, ratio
                ));
            }
            let w = weighted.subsets.iter().find(|x| x.name == subset).unwrap();
            let u = unweighted.subsets.iter().find(|x| x.name == subset).unwrap();
            ok &= w.root_crlb_worst < u.root_crlb_worst;
        }
    }
    Criterion {
        label: "5 (bound tightness, two 1-D sinusoids)",
        passed: ok,
        detail,
    }
    .report();
}

/// Criterion 6: off-grid RMSE lies within the on-grid bound envelope.
#[test]
fn criterion_6_gridding_envelope() {
    let s = scenario::fig7_8().unwrap();
    let report = crlb_rmse_curve(&s).unwrap();
    let mut ok = true;
    let mut detail = String::new();
    for row in &report.rows {
        for subset in ["frequency", "damping"] {
            let stat = row.subsets.iter().find(|x| x.name == subset).unwrap();
            let rmse = stat.rmse.unwrap();
            let lo = 0.9 * stat.root_crlb_best;
            let hi = 1.1 * stat.root_crlb_worst;
            let good = rmse >= lo && rmse <= hi;
            ok &= good;
            detail.push_str(&format!(
                "M={} {}: rmse {:.3e} in [{:.3e}, {:.3e}]{}; ",
                row.m,
                subset,
                rmse,
                lo,
                hi,
                if good { "" } else { " VIOLATED" }
            ));
        }
    }
    Criterion {
        label: "6 (off-grid error inside on-grid bound envelope)",
        passed: ok,
        detail,
    }
    .report();
}

/// Criterion 7: randomized property suites. The bulk runs in the unit and
/// property tests; this target re-checks the cross-module pieces in one
/// place at 100-draw scale.
#[test]
fn criterion_7_property_suites() {
    let model = SignalModel::damped_1d(1).unwrap();
    let noise = NoiseSpec::new(0.3).unwrap();
    let grid = CandidateGrid::uniform_1d(24).unwrap();
    let mut state = 77u64;
    let mut next = move || {
        state = state
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        (state >> 11) as f64 / (1u64 << 53) as f64
    };

    // FIM symmetry / PSD / rank and gradient-vs-FD over 100 draws.
    for _ in 0..100 {
        let theta = ParamVector::new(
            model,
            vec![
                0.5 + 1.5 * next(),
                0.05 + 0.4 * next(),
                0.02 + 0.2 * next(),
                std::f64::consts::TAU * next(),
            ],
        )
        .unwrap();
        let t = [(next() * 23.0).floor()];
        let fim = sampler_core::models::per_sample_fim(&theta, &t, &noise).unwrap();
        assert!((&fim - fim.transpose()).norm() <= 1e-12 * (1.0 + fim.norm()));
        let eig = fim.clone().symmetric_eigen();
        assert!(eig.eigenvalues.iter().all(|&e| e >= -1e-12 * fim.trace()));
        let svd = fim.clone().svd(false, false);
        let mut sv: Vec<f64> = svd.singular_values.iter().copied().collect();
        sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
        assert!(sv[2] <= 1e-10 * sv[0].max(1e-300));

        let g = sampler_core::models::grad_mean(&theta, &t).unwrap();
        let h = 1e-6;
        let scale = g.iter().map(|z| z.norm()).fold(1e-12, f64::max);
        for p in 0..4 {
            let x = theta.values()[p];
            let hi = theta.with_value(p, x + h).unwrap();
            let lo = theta.with_value(p, x - h).unwrap();
            let fd = (sampler_core::models::mean(&hi, &t).unwrap()
                - sampler_core::models::mean(&lo, &t).unwrap())
                / (2.0 * h);
            assert!((g[p] - fd).norm() < 1e-5 * scale);
        }
    }

    // Loewner monotonicity on 100 random weight pairs of one bank.
    let theta = ParamVector::new(model, vec![1.0, 0.22, 0.09, 0.4]).unwrap();
    let bank = FimBank::build(&theta, &grid, &noise).unwrap();
    for _ in 0..100 {
        let w: Vec<f64> = (0..bank.len()).map(|_| 0.2 + 0.5 * next()).collect();
        let v: Vec<f64> = w.iter().map(|x| (x + 0.4 * next()).min(1.0)).collect();
        let cw = crlb_diag(&aggregate_fim(&w, &bank).unwrap(), 0.0).unwrap();
        let cv = crlb_diag(&aggregate_fim(&v, &bank).unwrap(), 0.0).unwrap();
        for p in 0..4 {
            assert!(cv[p] <= cw[p] * (1.0 + 1e-10));
        }
    }

    // Worst case attained on the grid.
    let theta_b = ParamVector::new(model, vec![1.0, 0.22, 0.15, 0.4]).unwrap();
    let bank_b = FimBank::build(&theta_b, &grid, &noise).unwrap();
    let banks = vec![bank.clone(), bank_b];
    let w = vec![0.5; bank.len()];
    for p in 0..4 {
        let wc = sampler_core::fisher::worst_case_crlb(&w, &banks, p, 0.0).unwrap();
        let per: Vec<f64> = banks
            .iter()
            .map(|b| crlb_diag(&aggregate_fim(&w, b).unwrap(), 0.0).unwrap()[p])
            .collect();
        assert!(per.contains(&wc));
    }

    // Threshold determinism on ties.
    for _ in 0..100 {
        let w: Vec<f64> = (0..10).map(|i| if i % 2 == 0 { 0.7 } else { 0.3 }).collect();
        let a = threshold(&w, RoundingRule::TopM(3)).unwrap();
        let b = threshold(&w, RoundingRule::TopM(3)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, vec![0, 2, 4]);
    }

    // Budget-sweep monotonicity (8 budgets).
    let mut last = f64::INFINITY;
    for k in 0..8 {
        let gamma = 6.0 + 2.0 * k as f64;
        let problem = DesignProblem::new(vec![bank.clone()], gamma, vec![1.0; 4]).unwrap();
        let res = solve_sdp(&problem).unwrap();
        assert!(res.objective <= last * (1.0 + 1e-6));
        let feas = check_feasibility(&problem, &res).unwrap();
        assert!(feas.is_feasible(1e-6));
        last = res.objective;
    }

    // Simulation determinism under a fixed seed.
    let sel: Vec<usize> = (0..12).collect();
    let o1 = simulate(&theta, &grid, &sel, &noise, 5, 3).unwrap();
    let o2 = simulate(&theta, &grid, &sel, &noise, 5, 3).unwrap();
    assert_eq!(o1.values, o2.values);

    // Report byte determinism.
    let mut s = scenario::fig1(0.1).unwrap();
    s.budgets = vec![9.0];
    let r1 = run_scenario(&s).unwrap().to_csv().unwrap();
    let r2 = run_scenario(&s).unwrap().to_csv().unwrap();
    assert_eq!(r1, r2);

    Criterion {
        label: "7 (property suites)",
        passed: true,
        detail: "FIM PSD/symmetry/rank, gradient-vs-FD, Loewner monotonicity, budget \
                 monotonicity, worst-case attainment, threshold determinism, simulation and \
                 report determinism"
            .into(),
    }
    .report();
}

/// Criterion 8: qualitative sampling structure of the 1-D illustration.
#[test]
fn criterion_8_fig1_cluster_structure() {
    let clusters_of = |sel: &[usize]| -> Vec<Vec<usize>> {
        let mut out: Vec<Vec<usize>> = Vec::new();
        for &i in sel {
            match out.last_mut() {
                Some(c) if i - c.last().unwrap() <= 5 => c.push(i),
                _ => out.push(vec![i]),
            }
        }
        out
    };
    let mut centroids = Vec::new();
    let mut counts = Vec::new();
    for beta in [0.1, 0.05] {
        let s = scenario::fig1(beta).unwrap();
        let report = run_scenario(&s).unwrap();
        let sel = &report.rows[0].selected;
        let clusters = clusters_of(sel);
        counts.push(clusters.len());
        let last = clusters.last().unwrap();
        centroids.push(last.iter().map(|&i| i as f64).sum::<f64>() / last.len() as f64);
    }
    let ok = counts.iter().all(|&c| c >= 2) && centroids[1] > centroids[0];
    Criterion {
        label: "8 (two-cluster structure, late cluster moves with damping)",
        passed: ok,
        detail: format!(
            "clusters {counts:?} (>= 2 each); late-cluster centroids beta=0.1: {:.1}, \
             beta=0.05: {:.1}",
            centroids[0], centroids[1]
        ),
    }
    .report();
}

/// The infeasibility path demanded by the CLI contract: impossible caps
/// produce a certificate, not a bogus design.
#[test]
fn infeasible_caps_yield_certificate() {
    let s = scenario::fig1(0.1).unwrap();
    let banks = s.banks().unwrap();
    let problem = DesignProblem::new(banks, 13.0, vec![1.0; 4])
        .unwrap()
        .with_caps(vec![1e-12; 4])
        .unwrap();
    match solve_sdp(&problem) {
        Err(Error::Infeasible { tau, worst_param }) => {
            println!("PASS infeasibility certificate: tau={tau:.3e}, parameter {worst_param}");
            assert!(tau > 1.0);
        }
        other => panic!("expected infeasibility certificate, got {other:?}"),
    }
}

/// Simulation at an exactly representable schedule with σ² → 0 recovers
/// the model exactly; NLS returns the on-grid truth.
#[test]
fn zero_noise_estimation_recovers_truth() {
    let model = SignalModel::damped_1d(1).unwrap();
    let theta = ParamVector::new(model, vec![1.0, 0.25, 0.1, 0.5]).unwrap();
    let grid = CandidateGrid::uniform_1d(40).unwrap();
    let noise = NoiseSpec::new(1e-300).unwrap();
    let sel: Vec<usize> = (0..16).collect();
    let obs = simulate(&theta, &grid, &sel, &noise, 0, 0).unwrap();
    let search = EstimationGrid::centered(&theta, &[1e-4; 4], 3.0, 5)
        .unwrap()
        .with_polish(false);
    let est = nls_estimate(&obs, &model, &grid, &search).unwrap();
    for p in 0..4 {
        assert!(
            (est.values()[p] - theta.values()[p]).abs() < 1e-6,
            "parameter {p}"
        );
    }
    println!("PASS zero-noise recovery");
}
