//! Monte-Carlo checks of the exact linear-stochastic kernel against independent oracles.

use gibbsdyn::gibbs::sample_mu;
use gibbsdyn::linear::{frequency, stationary_covariance, stick_covariance, PropagatorTable};
use gibbsdyn::rng::{stream, Purpose};
use gibbsdyn::spectral::{PairField, SpectralField};
use gibbsdyn::{GridSpec, Mode};
use num_complex::Complex;
use rand::Rng;
use rand_distr::StandardNormal;

struct Moments {
    n: f64,
    sum: f64,
    sq: f64,
}

impl Moments {
    fn new() -> Self {
        Self { n: 0.0, sum: 0.0, sq: 0.0 }
    }
    fn push(&mut self, x: f64) {
        self.n += 1.0;
        self.sum += x;
        self.sq += x * x;
    }
    fn mean(&self) -> f64 {
        self.sum / self.n
    }
    fn se(&self) -> f64 {
        let m = self.mean();
        ((self.sq / self.n - m * m) * self.n / (self.n - 1.0) / self.n).sqrt()
    }
}

fn z(a: &Moments, b: &Moments) -> f64 {
    (a.mean() - b.mean()) / (a.se().powi(2) + b.se().powi(2)).sqrt()
}

#[test]
fn exact_step_matches_euler_maruyama() {
    // one step h = 0.1 from a fixed state; Euler–Maruyama with h/1024 as oracle
    let g = GridSpec::new(1, 5, 2.0).unwrap();
    let h = 0.1;
    let table = PropagatorTable::<f64>::new(g, h).unwrap();
    let x0 = sample_mu::<f64, _>(g, &mut stream(1, Purpose::Initial, 0));
    let modes: Vec<Mode> = vec![[0, 0, 0], [1, 0, 0], [2, 0, 0]];
    let stats = |state: &PairField<f64>| -> Vec<f64> {
        let mut out = Vec::new();
        for n in &modes {
            let u = state.u.coeff(*n).unwrap();
            let p = state.p.coeff(*n).unwrap();
            out.extend([u.re, p.re, u.re * u.re, p.re * p.re, u.re * p.re]);
        }
        out
    };
    let width = 5 * modes.len();
    let mut exact: Vec<Moments> = (0..width).map(|_| Moments::new()).collect();
    let mut rng = stream(1, Purpose::Dynamics, 0);
    let mut inc = Vec::new();
    for _ in 0..20_000 {
        let mut s = x0.clone();
        table.sample_increments(&mut rng, &mut inc);
        table.apply_in_place(&mut s, &inc);
        for (m, x) in exact.iter_mut().zip(stats(&s)) {
            m.push(x);
        }
    }
    let mut em: Vec<Moments> = (0..width).map(|_| Moments::new()).collect();
    let sub = 1024;
    let dt = h / sub as f64;
    let mut rng = stream(1, Purpose::Auxiliary(0), 0);
    for _ in 0..2000 {
        let mut u: Vec<Complex<f64>> = x0.u.half().to_vec();
        let mut p: Vec<Complex<f64>> = x0.p.half().to_vec();
        for _ in 0..sub {
            for k in 0..u.len() {
                let n = g.mode(g.center() + k);
                let a = 1.0 + g.dispersion_symbol(n);
                let scale = if k == 0 { 1.0 } else { std::f64::consts::FRAC_1_SQRT_2 };
                let dw = Complex::new(
                    rng.sample::<f64, _>(StandardNormal),
                    if k == 0 { 0.0 } else { rng.sample::<f64, _>(StandardNormal) },
                ) * (scale * dt.sqrt());
                let du = p[k] * dt;
                let dp = (-u[k] * a - p[k]) * dt + dw * std::f64::consts::SQRT_2;
                u[k] += du;
                p[k] += dp;
            }
        }
        let s = PairField {
            u: SpectralField::from_half(g, &u).unwrap(),
            p: SpectralField::from_half(g, &p).unwrap(),
        };
        for (m, x) in em.iter_mut().zip(stats(&s)) {
            m.push(x);
        }
    }
    for (i, (a, b)) in exact.iter().zip(&em).enumerate() {
        assert!(z(a, b).abs() <= 4.0, "statistic {i}: exact {} vs EM {}, z = {}", a.mean(), b.mean(), z(a, b));
    }
}

#[test]
fn stationary_law_is_preserved_by_exact_steps() {
    let g = GridSpec::new(1, 9, 2.0).unwrap();
    let table = PropagatorTable::<f64>::new(g, 0.3).unwrap();
    let mut rng = stream(2, Purpose::Dynamics, 0);
    let mut inc = Vec::new();
    let modes: Vec<Mode> = (0..=3).map(|k| [k, 0, 0]).collect();
    let mut acc: Vec<[Moments; 3]> = modes.iter().map(|_| [Moments::new(), Moments::new(), Moments::new()]).collect();
    for i in 0..20_000 {
        let mut s = sample_mu::<f64, _>(g, &mut stream(2, Purpose::Initial, i));
        for _ in 0..5 {
            table.sample_increments(&mut rng, &mut inc);
            table.apply_in_place(&mut s, &inc);
        }
        for (k, n) in modes.iter().enumerate() {
            let c = stationary_covariance(&g, *n);
            let u = s.u.coeff(*n).unwrap();
            let p = s.p.coeff(*n).unwrap();
            acc[k][0].push(u.norm_sqr() / c[0][0]);
            acc[k][1].push(p.norm_sqr() / c[1][1]);
            acc[k][2].push((u * p.conj()).re);
        }
    }
    for (k, m) in acc.iter().enumerate() {
        for (j, target) in [1.0, 1.0, 0.0].into_iter().enumerate() {
            let zz = (m[j].mean() - target) / m[j].se();
            assert!(zz.abs() <= 3.0, "mode {k} statistic {j}: mean {} z {zz}", m[j].mean());
        }
    }
}

#[test]
fn long_time_stick_variance_is_stationary() {
    let g = GridSpec::new(1, 9, 2.0).unwrap();
    let table = PropagatorTable::<f64>::new(g, 0.5).unwrap();
    let modes: Vec<Mode> = (0..=3).map(|k| [k, 0, 0]).collect();
    let mut acc: Vec<Moments> = modes.iter().map(|_| Moments::new()).collect();
    for i in 0..10_000 {
        let (stick, _) = gibbsdyn::linear::sample_stick(20.0, &table, &mut stream(3, Purpose::Dynamics, i), i).unwrap();
        for (k, n) in modes.iter().enumerate() {
            acc[k].push(stick.u.coeff(*n).unwrap().norm_sqr() * (1.0 + g.dispersion_symbol(*n)));
        }
    }
    for (k, m) in acc.iter().enumerate() {
        assert!(((m.mean() - 1.0) / m.se()).abs() <= 3.0, "mode {k}: {}", m.mean());
    }
}

#[test]
fn stick_covariance_matches_monte_carlo() {
    let g = GridSpec::new(1, 9, 2.0).unwrap();
    let h = 0.05;
    let (t, s) = (1.0, 0.6);
    let table = PropagatorTable::<f64>::new(g, h).unwrap();
    let mut f = PairField::zeros(g);
    f.u = SpectralField::cosine(g, [1, 0, 0], 1.0).unwrap().add(&SpectralField::cosine(g, [3, 0, 0], 0.5).unwrap());
    f.p = SpectralField::cosine(g, [2, 0, 0], 0.7).unwrap().add(&SpectralField::constant(g, 0.3));
    let oracle = stick_covariance(t, s, &f);
    let mut m = Moments::new();
    let mut inc = Vec::new();
    for i in 0..20_000 {
        let mut rng = stream(4, Purpose::Dynamics, i);
        let mut state = PairField::zeros(g);
        let mut at_s = 0.0;
        for k in 1..=20 {
            table.sample_increments(&mut rng, &mut inc);
            table.apply_in_place(&mut state, &inc);
            if k == 12 {
                at_s = state.dot(&f);
            }
        }
        m.push(state.dot(&f) * at_s);
    }
    let zz = (m.mean() - oracle) / m.se();
    assert!(zz.abs() <= 4.0, "MC {} vs quadrature {oracle} (z = {zz})", m.mean());
    assert!(frequency(&g, [0, 0, 0]) > 0.0);
}

#[test]
fn stick_covariance_is_bounded_by_the_dual_norm() {
    // γ(t,t)[f] <= C (‖f‖²_{H^{-s/2}} + ‖f_t‖²_{L²}) with one fitted C across random f and t
    let g = GridSpec::new(1, 17, 2.0).unwrap();
    let mut ratios = Vec::new();
    for i in 0..40 {
        let f = sample_mu::<f64, _>(g, &mut stream(5, Purpose::Initial, i));
        let dual: f64 = g
            .modes()
            .map(|(j, n)| {
                f.u.coeffs()[j].norm_sqr() / (1.0 + gibbsdyn::grid::norm_sq(n) as f64).powf(0.5 * g.dispersion())
                    + f.p.coeffs()[j].norm_sqr()
            })
            .sum();
        let t = 0.25 + 0.25 * (i % 16) as f64;
        ratios.push(stick_covariance(t, t, &f) / dual);
    }
    let max = ratios.iter().cloned().fold(0.0, f64::max);
    assert!(max.is_finite() && max < 4.0, "fitted constant {max}");
}
