use super::*;
use crate::bessel::extended::{ext_from_f64, ext_to_f64, log_bessel_i_extended_raw, ExtFloat};
use crate::estimators::{fit_batch, fit_sgd, SgdConfig};
use crate::rng::seeded_rng;
use crate::sampler::SamplerConfig;
use crate::vmf::{log_density, normalize};
use ndarray::{array, Array2};
use rand::Rng;

fn unit(v: &[f64]) -> Array1<f64> {
    normalize(Array1::from(v.to_vec()).view())
        .unwrap()
        .into_inner()
}

/// The three-component, five-dimensional reference model.
fn reference_model() -> MixtureParams {
    let comps = vec![
        VmfParams::new(unit(&[0.0889, -0.3556, 0.6815, 0.1185, 0.6222]), 100.0).unwrap(),
        VmfParams::new(unit(&[1.0, 0.0, 0.0, 0.0, 0.0]), 50.0).unwrap(),
        VmfParams::new(unit(&[-0.0889, 0.3556, -0.6815, -0.1185, -0.6222]), 100.0).unwrap(),
    ];
    MixtureParams::new(array![0.3, 0.4, 0.3], comps).unwrap()
}

fn sample_mixture(mix: &MixtureParams, n: usize, seed: u64) -> (Dataset, Vec<usize>) {
    super::sample_mixture(mix, n, &SamplerConfig::with_seed(seed)).unwrap()
}

#[test]
fn mixture_sampling_follows_weights() {
    let mix = reference_model();
    let (data, labels) = sample_mixture(&mix, 20_000, 77);
    assert_eq!(data.len(), 20_000);
    for m in 0..3 {
        let frac = labels.iter().filter(|&&l| l == m).count() as f64 / 20_000.0;
        let a = mix.alphas()[m];
        assert!((frac - a).abs() <= 4.0 * (a * (1.0 - a) / 20_000.0).sqrt());
        // points carry their component's direction
        let idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == m).collect();
        let mean = data.select(&idx).mean().unwrap();
        assert!(mean.dot(mix.components()[m].mu()) / mean.dot(&mean).sqrt() > 0.999);
    }
}

#[test]
fn single_component_marginal_is_density() {
    let p = VmfParams::new(unit(&[1.0, 2.0, -1.0]), 7.5).unwrap();
    let mix = MixtureParams::new(array![1.0], vec![p.clone()]).unwrap();
    let x = normalize(array![0.3, 0.1, 0.9].view()).unwrap();
    assert_eq!(
        log_marginal(&mix, &x).unwrap(),
        log_density(&p, &x).unwrap()
    );
}

#[test]
fn duplicate_components_collapse() {
    let p = VmfParams::new(unit(&[0.0, 1.0, 0.0, 1.0]), 30.0).unwrap();
    let mix = MixtureParams::uniform(vec![p.clone(), p.clone()]).unwrap();
    let x = normalize(array![0.2, 1.0, 0.0, 0.7].view()).unwrap();
    let a = log_marginal(&mix, &x).unwrap();
    let b = log_density(&p, &x).unwrap();
    assert!((a - b).abs() <= 1e-14 * b.abs().max(1.0));
}

/// `log Σ α_m p_m(x)` summed directly with 256-bit arithmetic.
fn extended_marginal(mix: &MixtureParams, x: &UnitVector) -> f64 {
    let bits = 256;
    let d = mix.dim();
    let s = d as f64 / 2.0 - 1.0;
    let log_2pi = ext_from_f64(2.0 * std::f64::consts::PI, bits).ln();
    let half_d = ext_from_f64(d as f64 / 2.0, bits);
    let mut total = ext_from_f64(0.0, bits);
    for (c, &a) in mix.components().iter().zip(mix.alphas()) {
        let kappa = ext_from_f64(c.kappa(), bits);
        let log_i = log_bessel_i_extended_raw(s, c.kappa(), bits, 100_000).unwrap();
        let log_c = ext_from_f64(s, bits) * kappa.ln() - &half_d * &log_2pi - log_i;
        let mut dot = ext_from_f64(0.0, bits);
        for (&m, &v) in c.mu().iter().zip(x.view().iter()) {
            dot += ext_from_f64(m, bits) * ext_from_f64(v, bits);
        }
        let log_term: ExtFloat = ext_from_f64(a, bits).ln() + kappa * dot + log_c;
        total += log_term.exp();
    }
    ext_to_f64(&total.ln())
}

#[test]
fn marginal_matches_extended_direct_sum() {
    let mix = reference_model();
    for x in [
        UnitVector::new(mix.components()[1].mu().clone()).unwrap(),
        normalize(array![0.3, -0.2, 0.5, 0.1, 0.4].view()).unwrap(),
        normalize(array![-1.0, 0.0, 0.2, 0.0, 0.0].view()).unwrap(),
    ] {
        let got = log_marginal(&mix, &x).unwrap();
        let want = extended_marginal(&mix, &x);
        assert!((got - want).abs() <= 1e-10 * want.abs(), "{got} vs {want}");
    }
}

#[test]
fn zero_weight_component_is_ignored() {
    let a = VmfParams::new(unit(&[1.0, 0.0, 0.0]), 5.0).unwrap();
    let b = VmfParams::new(unit(&[0.0, 1.0, 0.0]), 5.0).unwrap();
    let mix = MixtureParams::new(array![1.0, 0.0], vec![a.clone(), b]).unwrap();
    let x = normalize(array![0.0, 1.0, 0.0].view()).unwrap();
    assert_eq!(
        log_marginal(&mix, &x).unwrap(),
        log_density(&a, &x).unwrap()
    );
    let data = Dataset::new(array![[0.0, 1.0, 0.0], [1.0, 0.0, 0.0]]).unwrap();
    let q = e_step(&mix, &data).unwrap();
    assert!(q.q().column(1).iter().all(|&v| v == 0.0));
}

#[test]
fn symmetric_components_share_responsibility() {
    let p = VmfParams::new(unit(&[1.0, 1.0, 0.0]), 12.0).unwrap();
    let mix = MixtureParams::uniform(vec![p.clone(), p.clone(), p.clone(), p]).unwrap();
    let source = VmfParams::new(unit(&[0.0, 0.0, 1.0]), 2.0).unwrap();
    let data = crate::sampler::sample_vmf(&source, 30, &SamplerConfig::with_seed(1)).unwrap();
    let q = e_step(&mix, &data).unwrap();
    assert!(q.q().iter().all(|&v| (v - 0.25).abs() < 1e-15));
}

#[test]
fn concentrated_component_dominates_near_its_mean() {
    let mix = MixtureParams::new(
        array![0.5, 0.5],
        vec![
            VmfParams::new(unit(&[1.0, 0.0, 0.0, 0.0]), 500.0).unwrap(),
            VmfParams::new(unit(&[0.0, 1.0, 0.0, 0.0]), 5.0).unwrap(),
        ],
    )
    .unwrap();
    let data = Dataset::new(
        Array2::from_shape_vec((1, 4), unit(&[1.0, 1e-3, 0.0, 0.0]).to_vec()).unwrap(),
    )
    .unwrap();
    let q = e_step(&mix, &data).unwrap();
    assert!(q.q()[[0, 0]] > 0.999);
    assert!((q.q().row(0).sum() - 1.0).abs() <= f64::EPSILON);
}

#[test]
fn responsibilities_are_row_stochastic() {
    let mix = reference_model();
    let (data, _) = sample_mixture(&mix, 500, 2);
    let q = e_step(&mix, &data).unwrap();
    for row in q.q().rows() {
        assert!((row.sum() - 1.0).abs() <= 1e-9);
        assert!(row.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }
    assert!(Responsibilities::new(q.into_inner()).is_ok());
    assert!(Responsibilities::new(array![[0.5, 0.6]]).is_err());
}

#[test]
fn hard_assignment_m_step_is_per_cluster_batch_fit() {
    let truth = reference_model();
    let (data, labels) = sample_mixture(&truth, 600, 3);
    let q = Responsibilities::one_hot(&labels, 3).unwrap();
    let mix = m_step(&q, &data).unwrap();
    for m in 0..3 {
        let idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == m).collect();
        let own = fit_batch(&data.select(&idx)).unwrap().params;
        let got = &mix.components()[m];
        assert!((got.kappa() - own.kappa()).abs() <= 1e-12 * own.kappa());
        for (a, b) in got.mu().iter().zip(own.mu()) {
            assert!((a - b).abs() <= 1e-12);
        }
        let frac = idx.len() as f64 / labels.len() as f64;
        assert!((mix.alphas()[m] - frac).abs() <= 1e-15);
    }
}

#[test]
fn uniform_responsibilities_give_identical_components() {
    let (data, _) = sample_mixture(&reference_model(), 200, 4);
    let q = Responsibilities::new(Array2::from_elem((200, 4), 0.25)).unwrap();
    let mix = m_step(&q, &data).unwrap();
    let batch = fit_batch(&data).unwrap().params;
    for m in 0..4 {
        assert!((mix.alphas()[m] - 0.25).abs() <= 1e-15);
        let c = &mix.components()[m];
        assert!((c.kappa() - batch.kappa()).abs() <= 1e-12 * batch.kappa());
        for (a, b) in c.mu().iter().zip(batch.mu()) {
            assert!((a - b).abs() <= 1e-12);
        }
    }
}

#[test]
fn empty_component_signals_collapse() {
    let (data, _) = sample_mixture(&reference_model(), 50, 5);
    let q = Responsibilities::one_hot(&vec![0; 50], 2).unwrap();
    assert!(matches!(
        m_step(&q, &data),
        Err(VmfError::ComponentCollapse { component: 1, .. })
    ));
}

#[test]
fn em_single_component_is_batch_fit() {
    let (data, _) = sample_mixture(&reference_model(), 400, 6);
    let cfg = EmConfig {
        kappa_update: KappaUpdate::ClosedForm,
        ..Default::default()
    };
    let fit = fit_em(&data, 1, &cfg).unwrap();
    let batch = fit_batch(&data).unwrap().params;
    let c = &fit.params.components()[0];
    assert_eq!(fit.params.alphas()[0], 1.0);
    assert!((c.kappa() - batch.kappa()).abs() <= 1e-12 * batch.kappa());
    // the exact update solves A_d(κ) = ‖x̄‖
    let exact = fit_em(&data, 1, &EmConfig::default()).unwrap();
    let r = data.mean().unwrap();
    let r = r.dot(&r).sqrt();
    let k = exact.params.components()[0].kappa();
    assert!((crate::bessel::mean_resultant(5, k).unwrap() - r).abs() < 1e-13);
    for (a, b) in c.mu().iter().zip(batch.mu()) {
        assert!((a - b).abs() <= 1e-12);
    }
    assert!(fit.converged);
}

#[test]
fn em_separates_antipodal_clusters() {
    let mix = MixtureParams::new(
        array![0.25, 0.75],
        vec![
            VmfParams::new(unit(&[0.0, 0.0, 1.0, 0.0]), 400.0).unwrap(),
            VmfParams::new(unit(&[0.0, 0.0, -1.0, 0.0]), 400.0).unwrap(),
        ],
    )
    .unwrap();
    let (data, labels) = sample_mixture(&mix, 800, 7);
    let fit = fit_em(&data, 2, &EmConfig::default()).unwrap();
    let frac = labels.iter().filter(|&&l| l == 0).count() as f64 / 800.0;
    let e = permutation_matched_error(&fit.params, &mix).unwrap();
    let aligned = fit.params.permuted(&e.perm).unwrap();
    assert!((aligned.alphas()[0] - frac).abs() < 1e-6);
    assert!(aligned.components().iter().all(|c| c.kappa() > 200.0));
}

#[test]
fn em_recovers_reference_model_and_ascends() {
    let truth = reference_model();
    let (data, _) = sample_mixture(&truth, 1000, 8);
    let fit = fit_em(&data, 3, &EmConfig::default()).unwrap();
    assert!(fit.converged && fit.iterations < 30, "{}", fit.iterations);
    for w in fit.ll_trace.windows(2) {
        assert!(w[1] - w[0] >= -1e-9 * w[0].abs(), "{:?}", fit.ll_trace);
    }
    let e = permutation_matched_error(&fit.params, &truth).unwrap();
    let aligned = fit.params.permuted(&e.perm).unwrap();
    for m in 0..3 {
        let (l, t) = (&aligned.components()[m], &truth.components()[m]);
        assert!((aligned.alphas()[m] - truth.alphas()[m]).abs() <= 0.05);
        assert!(l.mu().dot(t.mu()) >= 0.999);
        assert!((l.kappa() - t.kappa()).abs() / t.kappa() <= 0.15);
    }
}

#[test]
fn mix_sgd_single_component_tracks_single_fit() {
    let (data, _) = sample_mixture(&reference_model(), 1000, 9);
    let cfg = SgdConfig {
        epochs: 30,
        batch_size: 64,
        seed: 4,
        ..Default::default()
    };
    let single = fit_sgd(&data, &cfg).unwrap();
    let mix = fit_mix_sgd(&data, 1, &cfg).unwrap();
    assert_eq!(mix.params.alphas()[0], 1.0);
    let c = &mix.params.components()[0];
    assert!((c.kappa() - single.params.kappa()).abs() <= 1e-8 * single.params.kappa());
    for (a, b) in c.mu().iter().zip(single.params.mu()) {
        assert!((a - b).abs() <= 1e-8);
    }
    for (a, b) in mix.ll_trace.iter().zip(&single.ll_trace) {
        assert!((a - b).abs() <= 1e-8 * b.abs().max(1.0));
    }
}

#[test]
fn mix_sgd_recovers_reference_model() {
    let truth = reference_model();
    let (data, _) = sample_mixture(&truth, 1000, 10);
    let cfg = SgdConfig {
        lr: 0.1,
        batch_size: 64,
        seed: 10,
        ..Default::default()
    };
    let fit = fit_mix_sgd(&data, 3, &cfg).unwrap();
    let e = permutation_matched_error(&fit.params, &truth).unwrap();
    let aligned = fit.params.permuted(&e.perm).unwrap();
    assert!((aligned.alphas().sum() - 1.0).abs() <= 1e-12);
    for m in 0..3 {
        let (l, t) = (&aligned.components()[m], &truth.components()[m]);
        assert!(
            (aligned.alphas()[m] - truth.alphas()[m]).abs() <= 0.05,
            "{aligned:?}"
        );
        assert!(l.mu().dot(t.mu()) >= 0.999, "{aligned:?}");
        assert!(
            (l.kappa() - t.kappa()).abs() / t.kappa() <= 0.15,
            "{aligned:?}"
        );
    }
}

fn perturbed(
    mix: &MixtureParams,
    f: impl Fn(&mut Vec<VmfParams>, &mut Array1<f64>),
) -> MixtureParams {
    let mut comps = mix.components().to_vec();
    let mut alphas = mix.alphas().clone();
    f(&mut comps, &mut alphas);
    MixtureParams::from_parts_unchecked(alphas, comps)
}

#[test]
fn mixture_gradients_match_finite_differences() {
    let mix = reference_model();
    let (data, _) = sample_mixture(&mix, 40, 11);
    // move away from the truth so gradients are not tiny
    let start = perturbed(&mix, |c, a| {
        c[0].set_unchecked(unit(&[0.2, -0.3, 0.6, 0.2, 0.6]), 60.0);
        let mu = c[1].mu().clone();
        c[1].set_unchecked(mu, 80.0);
        *a = array![0.2, 0.5, 0.3];
    });
    let g = mixture_gradient(&start, &data).unwrap();
    let h = 1e-5;
    let f = |m: &MixtureParams| mixture_objective(m, &data).unwrap();
    for k in 0..3 {
        let kap = start.components()[k].kappa();
        let mu0 = start.components()[k].mu().clone();
        let up = perturbed(&start, |c, _| c[k].set_unchecked(mu0.clone(), kap + h));
        let dn = perturbed(&start, |c, _| c[k].set_unchecked(mu0.clone(), kap - h));
        let fd = (f(&up) - f(&dn)) / (2.0 * h);
        assert!(
            (fd - g.kappa[k]).abs() <= 1e-5 * fd.abs().max(g.kappa[k].abs()),
            "κ{k}"
        );

        // μ: directional derivative along a tangent direction
        let mu = start.components()[k].mu().clone();
        let mut t = Array1::from_shape_fn(5, |j| {
            (j as f64 + 1.0) * if k % 2 == 0 { 1.0 } else { -1.0 }
        });
        crate::estimators::project_tangent(&mut t, &mu);
        let up = perturbed(&start, |c, _| c[k].set_unchecked(&mu + &(h * &t), kap));
        let dn = perturbed(&start, |c, _| c[k].set_unchecked(&mu - &(h * &t), kap));
        let fd = (f(&up) - f(&dn)) / (2.0 * h);
        let an = g.mu[k].dot(&t);
        assert!((fd - an).abs() <= 1e-5 * fd.abs().max(an.abs()), "μ{k}");
    }
    // α: along a simplex tangent direction
    let t = array![1.0, -0.5, -0.5];
    let up = perturbed(&start, |_, a| *a = &*a + &(h * &t));
    let dn = perturbed(&start, |_, a| *a = &*a - &(h * &t));
    let fd = (f(&up) - f(&dn)) / (2.0 * h);
    let an = g.alphas.dot(&t);
    assert!(
        (fd - an).abs() <= 1e-5 * fd.abs().max(an.abs()),
        "{fd} vs {an}"
    );
}

#[test]
fn reversed_components_match_exactly() {
    let truth = reference_model();
    let reversed = truth.permuted(&[2, 1, 0]).unwrap();
    let e = permutation_matched_error(&reversed, &truth).unwrap();
    assert_eq!(e.total(), 0.0);
    assert_eq!(e.perm, vec![2, 1, 0]);
}

#[test]
fn alpha_perturbation_is_reported() {
    let truth = reference_model();
    let learned = perturbed(&truth, |_, a| {
        a[0] += 0.01;
        a[2] -= 0.01;
    });
    let e = permutation_matched_error(&learned, &truth).unwrap();
    assert!((e.alpha - 0.02).abs() < 1e-12);
    assert_eq!((e.mu, e.kappa), (0.0, 0.0));
}

#[test]
fn matching_equals_brute_force() {
    let mut rng = seeded_rng(12);
    let random_mix = |rng: &mut crate::rng::VmfRng| {
        let comps = (0..3)
            .map(|_| {
                let v: Vec<f64> = (0..4).map(|_| rng.random::<f64>() - 0.5).collect();
                VmfParams::new(unit(&v), rng.random::<f64>() * 20.0).unwrap()
            })
            .collect();
        let w: Vec<f64> = (0..3).map(|_| rng.random::<f64>() + 0.1).collect();
        let s: f64 = w.iter().sum();
        MixtureParams::new(w.iter().map(|x| x / s).collect(), comps).unwrap()
    };
    for _ in 0..20 {
        let a = random_mix(&mut rng);
        let b = random_mix(&mut rng);
        let e = permutation_matched_error(&a, &b).unwrap();
        let perms = [
            [0, 1, 2],
            [0, 2, 1],
            [1, 0, 2],
            [1, 2, 0],
            [2, 0, 1],
            [2, 1, 0],
        ];
        let best = perms
            .iter()
            .map(|p| {
                (0..3)
                    .map(|m| {
                        let (l, t) = (&a.components()[p[m]], &b.components()[m]);
                        (a.alphas()[p[m]] - b.alphas()[m]).abs()
                            + (l.mu() - t.mu()).mapv(f64::abs).sum()
                            + (l.kappa() - t.kappa()).abs()
                    })
                    .sum::<f64>()
            })
            .fold(f64::INFINITY, f64::min);
        assert!((e.total() - best).abs() <= 1e-12 * best);
    }
}

#[test]
fn json_round_trip() {
    let mix = reference_model();
    let text = serde_json::to_string(&mix).unwrap();
    assert!(text.contains("\"alphas\"") && text.contains("\"components\""));
    let back: MixtureParams = serde_json::from_str(&text).unwrap();
    assert_eq!(back, mix);
    let bad = text.replace("0.4", "0.5");
    assert!(serde_json::from_str::<MixtureParams>(&bad).is_err());
}

#[test]
fn rejects_malformed_mixtures() {
    let p = VmfParams::new(unit(&[1.0, 0.0]), 1.0).unwrap();
    let q = VmfParams::new(unit(&[1.0, 0.0, 0.0]), 1.0).unwrap();
    assert!(MixtureParams::new(array![0.5, 0.5], vec![p.clone(), q]).is_err());
    assert!(MixtureParams::new(array![0.7, 0.7], vec![p.clone(), p.clone()]).is_err());
    assert!(MixtureParams::new(array![1.5, -0.5], vec![p.clone(), p]).is_err());
    assert!(MixtureParams::new(array![], vec![]).is_err());
}
