//! Acceptance suite. Each test prints one `PASS`/`FAIL` line and then
//! asserts every check behind it. Run with `--nocapture` to see the lines.

use std::time::{Duration, Instant};

use geoxrt::geometry::{influx_fan, trace_influx, InfluxPoint, MetricField, PathSample};
use geoxrt::lab::{
    global_probe, higgs_constant_closed_form, higgs_probe, local_probe, strip_probe, GridSetup, HiggsSetup, LocalSetup, Outcome,
    StripSetup, Thresholds,
};
use geoxrt::microlocal::{
    decay_fit, default_lambda_grid, default_probe_set, fbi, radon_wf_consistency, wf_probe, DiskPhantom, PhaseSpacePoint, RadonWfSetup,
    TestDistribution, WfSetup,
};
use geoxrt::transforms::{
    attenuated_transform, determinant, pseudo_residual, scattering_data, scattering_sinogram, transport_weight, Attenuation, CMat,
    FieldPoint, MatrixFieldConfig, MatrixWeight, VectorSource,
};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

struct Check {
    name: String,
    ok: bool,
    detail: String,
}

struct Criterion {
    id: u32,
    title: &'static str,
    limit: Duration,
    start: Instant,
    checks: Vec<Check>,
}

impl Criterion {
    fn new(id: u32, title: &'static str, limit_secs: u64) -> Self {
        Criterion {
            id,
            title,
            limit: Duration::from_secs(limit_secs),
            start: Instant::now(),
            checks: Vec::new(),
        }
    }

    fn check(&mut self, name: impl Into<String>, ok: bool, detail: impl Into<String>) {
        self.checks.push(Check {
            name: name.into(),
            ok,
            detail: detail.into(),
        });
    }

    fn finish(mut self) {
        let elapsed = self.start.elapsed();
        self.check(
            "runtime",
            elapsed <= self.limit,
            format!("{:.1}s of {}s", elapsed.as_secs_f64(), self.limit.as_secs()),
        );
        let ok = self.checks.iter().all(|c| c.ok);
        let failed: Vec<String> = self
            .checks
            .iter()
            .filter(|c| !c.ok)
            .map(|c| format!("{} [{}]", c.name, c.detail))
            .collect();
        let summary: Vec<String> = self.checks.iter().map(|c| format!("{} {}", c.name, c.detail)).collect();
        println!(
            "criterion {} {}: {} ({})",
            self.id,
            self.title,
            if ok { "PASS" } else { "FAIL" },
            if ok { summary.join("; ") } else { failed.join("; ") }
        );
        assert!(ok, "criterion {} failed: {}", self.id, failed.join("; "));
    }
}

fn sci(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.1e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn c(v: f64) -> Complex64 {
    Complex64::new(v, 0.0)
}

fn exp_field(n: usize, entries: &[&[&str]]) -> MatrixWeight {
    MatrixWeight::Field(
        MatrixFieldConfig::Exp {
            n,
            entries: entries.iter().map(|r| r.iter().map(|s| s.to_string()).collect()).collect(),
        }
        .build()
        .unwrap(),
    )
}

fn weight_n1() -> MatrixWeight {
    exp_field(1, &[&["0.3*exp(-(x1^2+x2^2)/0.3) + 0.1*i*x1"]])
}

fn weight_n2() -> MatrixWeight {
    exp_field(
        2,
        &[
            &["0.3*exp(-(x1^2+x2^2)/0.3)", "0.1*x1"],
            &["-0.1*x2", "0.2*i*exp(-(x1^2+x2^2)/0.3)"],
        ],
    )
}

fn bump_metric() -> MetricField {
    MetricField::conformal_bump(0.05, [0.0, 0.0], 0.5).unwrap()
}

#[test]
fn criterion_1_geometry() {
    let mut cr = Criterion::new(1, "geometry oracles", 10);
    let m = MetricField::euclidean();
    let fan = influx_fan(64, 16, 0.05).unwrap();
    let tau_err = fan
        .par_iter()
        .map(|z| (trace_influx(&m, z, 1e-3).unwrap().tau_plus - 2.0 * z.alpha.cos()).abs())
        .reduce(|| 0.0, f64::max);
    cr.check("tau = 2cos(alpha)", tau_err <= 1e-8, format!("max err {tau_err:.2e}"));

    let curved = MetricField::conformal_bump(0.3, [0.1, -0.1], 0.4).unwrap();
    let rays = influx_fan(8, 4, 0.2).unwrap();
    let defect = |h: f64| {
        rays.iter()
            .map(|z| trace_influx(&curved, z, h).unwrap().speed_defect(&curved))
            .fold(0.0, f64::max)
    };
    let fine = defect(1e-3).max(
        rays.iter()
            .map(|z| trace_influx(&m, z, 1e-3).unwrap().speed_defect(&m))
            .fold(0.0, f64::max),
    );
    cr.check("speed defect at h=1e-3", fine <= 1e-8, format!("{fine:.2e}"));
    let hs = [0.08, 0.04, 0.02];
    let d: Vec<f64> = hs.iter().map(|&h| defect(h)).collect();
    let ratios: Vec<f64> = d.windows(2).map(|w| w[0] / w[1]).collect();
    let order = ratios.iter().map(|r| r.log2()).fold(f64::INFINITY, f64::min);
    cr.check(
        "order under halving",
        order >= 2.0,
        format!("defects {}, order {order:.2}", sci(&d)),
    );
    cr.finish();
}

#[test]
fn criterion_2_transforms() {
    let mut cr = Criterion::new(2, "transform oracles", 30);
    let m = MetricField::euclidean();
    let diameter = InfluxPoint::new(0.0, 0.0);
    let one = Attenuation::constant(CMat::from_element(1, 1, c(1.0)));
    let v = attenuated_transform(&one, &VectorSource::ones(1), &diameter, &m, 1e-3).unwrap()[0];
    let want = 2f64.exp() - 1.0;
    cr.check(
        "scalar attenuated (e^2-1)",
        (v - c(want)).norm() <= 1e-7,
        format!("err {:.2e}", (v - c(want)).norm()),
    );

    let nil = Attenuation::constant(CMat::from_row_slice(2, 2, &[c(0.0), c(1.0), c(0.0), c(0.0)]));
    let fan = influx_fan(32, 8, 0.1).unwrap();
    let nil_err = fan
        .par_iter()
        .map(|z| {
            let l = 2.0 * z.alpha.cos();
            let want = CMat::from_row_slice(2, 2, &[c(1.0), c(l), c(0.0), c(1.0)]);
            (scattering_data(&nil, z, &m, 1e-2).unwrap() - want).norm()
        })
        .reduce(|| 0.0, f64::max);
    cr.check("nilpotent [[1,L],[0,1]]", nil_err <= 1e-8, format!("max err {nil_err:.2e}"));

    // det W_A(t) = exp(−∫₀ᵗ tr A), with the trace integral by Simpson on the path
    let metric = bump_metric();
    let a = Attenuation::new(
        MatrixFieldConfig::Expr {
            n: 2,
            entries: vec![
                vec!["0.3*exp(-((x1-0.2)^2 + x2^2)/0.2)".into(), "0.2*x2 + 0.1*i".into()],
                vec!["-0.25*x1*x2".into(), "0.4*exp(-(x1^2 + (x2+0.3)^2)/0.25) - 0.1".into()],
            ],
        }
        .build()
        .unwrap(),
    );
    let liouville = fan
        .par_iter()
        .map(|z| {
            let sol = transport_weight(&a, z, &metric, 1e-3).unwrap();
            let p = &sol.path;
            let tr = |s: &PathSample| a.eval(&FieldPoint::on_ray(z, s)).trace();
            let mut integral = c(0.0);
            let mut worst = 0.0f64;
            for i in 0..p.intervals() {
                let dt = p.samples[i + 1].t - p.samples[i].t;
                integral += (tr(&p.samples[i]) + tr(&p.midpoints[i]) * 4.0 + tr(&p.samples[i + 1])) * (dt / 6.0);
                worst = worst.max((determinant(&sol.nodes[i + 1]) - (-integral).exp()).norm());
            }
            worst
        })
        .reduce(|| 0.0, f64::max);
    cr.check("Liouville determinant", liouville <= 1e-7, format!("max err {liouville:.2e}"));
    cr.finish();
}

/// Higgs-type pair entries: Gaussian bumps with random amplitude, center and width.
fn random_analytic(rng: &mut ChaCha8Rng) -> Attenuation {
    let entries = (0..2)
        .map(|_| {
            (0..2)
                .map(|_| {
                    let a = rng.random_range(-0.5..0.5);
                    let b = rng.random_range(-0.3..0.3);
                    let (cx, cy) = (rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5));
                    let w = rng.random_range(0.2..0.6);
                    format!("({a} + {b}*i)*exp(-((x1-({cx}))^2 + (x2-({cy}))^2)/{w})")
                })
                .collect()
        })
        .collect();
    Attenuation::new(MatrixFieldConfig::Expr { n: 2, entries }.build().unwrap())
}

#[test]
fn criterion_3_pseudo_linearization() {
    let mut cr = Criterion::new(3, "pseudo-linearization", 120);
    let m = &bump_metric();
    let fan = influx_fan(32, 8, 0.1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_601);
    let pairs: Vec<(Attenuation, Attenuation)> = (0..20).map(|_| (random_analytic(&mut rng), random_analytic(&mut rng))).collect();
    let worst = pairs
        .par_iter()
        .flat_map(|(a, b)| fan.par_iter().map(move |z| pseudo_residual(a, b, z, m, 5e-3).unwrap().norm()))
        .reduce(|| 0.0, f64::max);
    cr.check("20 pairs x 256 rays", worst <= 1e-6, format!("max residual {worst:.2e}"));
    cr.finish();
}

#[test]
fn criterion_4_global() {
    let mut cr = Criterion::new(4, "global injectivity", 300);
    let thr = Thresholds::default();
    let fan = influx_fan(80, 30, 0.05).unwrap();
    let setup = GridSetup::default();
    assert_eq!(setup.m, 32);
    let n1 = VectorSource::gaussian(1, 1.0, [0.1, 0.05], 0.5);
    let n2 = VectorSource::expr(&["exp(-((x1-0.1)^2 + x2^2)/0.25)", "0.5*exp(-(x1^2 + (x2+0.2)^2)/0.2) + 0.2*i*x1"]).unwrap();
    for (label, metric) in [("euclidean", MetricField::euclidean()), ("bump", bump_metric())] {
        for (n, weight, phantom) in [(1, weight_n1(), &n1), (2, weight_n2(), &n2)] {
            let r = global_probe(&metric, &weight, phantom, &fan, &setup, &thr).unwrap();
            let (err, smin, over) = (r.metric("rel_error"), r.metric("sigma_min"), r.metric("oversampling"));
            let ok = r.hypotheses_hold() && r.passed() && err <= 0.01 && smin > 0.0 && over >= 3.0;
            cr.check(
                format!("{label} N={n}"),
                ok,
                format!("err {err:.2e}, sigma_min {smin:.2e}, {over:.1}x"),
            );
        }
    }
    let strip_fan = influx_fan(80, 60, 0.05).unwrap();
    let s = strip_probe(
        &MetricField::euclidean(),
        &MatrixWeight::identity(1),
        &n1,
        &strip_fan,
        &StripSetup::rings(4),
        &setup,
        &Thresholds::with_max_error(0.03),
    )
    .unwrap();
    let err = s.report.metric("rel_error");
    cr.check(
        "strip 4 rings",
        err <= 0.03 && s.report.hypotheses_hold(),
        format!("err {err:.2e}, rings {}", sci(&s.ring_errors)),
    );
    cr.finish();
}

#[test]
fn criterion_5_local() {
    let mut cr = Criterion::new(5, "local injectivity", 120);
    let m = MetricField::euclidean();
    let thr = Thresholds::with_max_error(0.02);
    let setup = LocalSetup::default();
    let lens = VectorSource::smooth_bump(1, 1.0, [0.905, 0.0], 0.05);
    let r = local_probe(&m, &weight_n1(), &lens, &setup, &thr).unwrap();
    let err = r.metric("rel_error");
    cr.check("lens phantom", r.outcome == Outcome::Pass && err <= 0.02, format!("err {err:.2e}"));
    let deep = VectorSource::smooth_bump(1, 1.0, [0.0, 0.0], 0.2);
    let d = local_probe(&m, &weight_n1(), &deep, &setup, &thr).unwrap();
    cr.check(
        "deep phantom",
        d.outcome == Outcome::NonIdentifiable,
        format!("{:?}, unseen {}", d.outcome, d.metric("unseen_phantom_pixels")),
    );
    cr.finish();
}

#[test]
fn criterion_6_higgs() {
    let mut cr = Criterion::new(6, "Higgs recovery", 300);
    let m = MetricField::euclidean();
    let constant = Complex64::new(0.4, -0.3);
    let fan = influx_fan(32, 8, 0.1).unwrap();
    let s = scattering_sinogram(&Attenuation::constant(CMat::from_element(1, 1, constant)), &fan, &m, 1e-3).unwrap();
    let worst = higgs_constant_closed_form(&s)
        .unwrap()
        .iter()
        .map(|e| (e - constant).norm())
        .fold(0.0, f64::max);
    cr.check("N=1 log C / tau", worst <= 1e-6, format!("max err {worst:.2e}"));

    let bump = "0.3*exp(-(x1^2+x2^2)/0.18)";
    let field = MatrixFieldConfig::Expr {
        n: 2,
        entries: vec![
            vec![bump.into(), format!("0.5*x1*{bump}")],
            vec![format!("-0.5*x2*{bump}"), format!("i*{bump}")],
        ],
    }
    .build()
    .unwrap();
    let r = higgs_probe(
        &m,
        &field,
        &influx_fan(40, 20, 0.05).unwrap(),
        &HiggsSetup::default(),
        &Thresholds::default(),
        None,
    )
    .unwrap();
    let err = r.report.metric("rel_error");
    cr.check(
        "N=2 bump",
        err <= 0.01 && r.iterations <= 15,
        format!("err {err:.2e} in {} iterations", r.iterations),
    );
    cr.finish();
}

#[test]
fn criterion_7_fbi() {
    let mut cr = Criterion::new(7, "FBI criteria", 60);
    let dirac = TestDistribution::Dirac { point: vec![0.0] };
    for z in [0.25, 0.5] {
        let u = PhaseSpacePoint::new(vec![z], vec![1.0]).unwrap();
        let eps = decay_fit(&fbi(&dirac, &u, &default_lambda_grid()).unwrap()).unwrap().epsilon;
        let want = z * z / 2.0;
        cr.check(
            format!("dirac z={z}"),
            (eps - want).abs() <= 1e-3,
            format!("eps {eps:.5} vs {want:.5}"),
        );
    }
    let setup = WfSetup::default();
    let at = |z: f64, zeta: f64| PhaseSpacePoint::new(vec![z], vec![zeta]).unwrap();
    let origin = wf_probe(&dirac, &at(0.0, 1.0), &setup).unwrap();
    cr.check("dirac z=0 singular", !origin.regular, format!("min eps {:.1e}", origin.min_epsilon));
    let interval = TestDistribution::Interval { a: -0.5, b: 0.5 };
    let interior = [-0.3, 0.0, 0.25]
        .iter()
        .flat_map(|&z| [at(z, 1.0), at(z, -1.0)])
        .all(|u| wf_probe(&interval, &u, &setup).unwrap().regular);
    cr.check("interval interior regular", interior, "z in {-0.3, 0, 0.25}");
    let ends = [-0.5, 0.5]
        .iter()
        .flat_map(|&z| [at(z, 1.0), at(z, -1.0)])
        .all(|u| !wf_probe(&interval, &u, &setup).unwrap().regular);
    cr.check("interval endpoints singular", ends, "z = ±0.5, normal directions");
    cr.finish();
}

#[test]
fn criterion_8_radon_wf() {
    let mut cr = Criterion::new(8, "Radon wavefront consistency", 180);
    let disk = DiskPhantom::default();
    assert_eq!(disk.radius, 0.5);
    let r = radon_wf_consistency(
        &MetricField::euclidean(),
        &disk,
        &default_probe_set(&disk),
        &RadonWfSetup::default(),
    )
    .unwrap();
    let singular = r.probes.iter().filter(|p| p.phantom_singular).count();
    cr.check(
        "probe set covers the boundary",
        singular >= 2,
        format!("{} probes, {singular} singular", r.probes.len()),
    );
    cr.check(
        "no violations",
        r.violations == 0,
        format!("{} violations, {} notes", r.violations, r.notes.len()),
    );
    cr.finish();
}
