//! Acceptance suite: one line per criterion, non-zero exit if any fails.
//!
//! Run with `cargo test -p corrgeom-cli --test acceptance`.

use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use corrgeom::fixed_rank::{horizontal_project, vertical_coefficient, vertical_project};
use corrgeom::oracle::{fd_gradient, o2_grid_distance, GridSpec};
use corrgeom::orthogonal::og_retract;
use corrgeom::product_sphere::{ps_exp, ps_log, ps_metric, ps_project};
use corrgeom::quotient::{
    alignment_gradient, alignment_loss, finite_escape_direction, geodesic_rank_profile,
    k_embedding, max_full_rank_interval, GeodesicSegment,
};
use corrgeom::sphere::{frechet_gradient, frechet_loss, sphere_exp, sphere_log};
use corrgeom::{
    factorize, frechet_mean, gram, orbit_dist, orbit_exp, orbit_log, OrbitPoint, OrthogonalMatrix,
    ProductTangent, RankTolerance, SolverConfig, SpherePoint, SphereTangent, UnitRowMatrix,
    WeightedSampleSet,
};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

type Check = Result<String, String>;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn gaussian(m: usize, k: usize, r: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(m, k, |_, _| r.sample(StandardNormal))
}

fn random_factor(m: usize, k: usize, r: &mut ChaCha8Rng) -> UnitRowMatrix {
    UnitRowMatrix::normalized(gaussian(m, k, r)).unwrap()
}

fn nearby(x: &UnitRowMatrix, eps: f64, r: &mut ChaCha8Rng) -> UnitRowMatrix {
    let (m, k) = x.shape();
    UnitRowMatrix::normalized(x.as_matrix() + gaussian(m, k, r) * eps).unwrap()
}

fn orbit(x: UnitRowMatrix) -> OrbitPoint {
    OrbitPoint::new(x)
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

// 1
fn metric_axioms() -> Check {
    let cfg = SolverConfig::default();
    let (mut self_max, mut sym_max, mut tri_max) = (0.0f64, 0.0f64, f64::NEG_INFINITY);
    for (m, k) in [(4, 2), (6, 3)] {
        for seed in 0..50 {
            let mut r = rng(1000 + seed);
            let x = orbit(random_factor(m, k, &mut r));
            let y = orbit(random_factor(m, k, &mut r));
            let z = orbit(random_factor(m, k, &mut r));
            let dxx = orbit_dist(&x, &x, &cfg).map_err(err)?;
            let dxy = orbit_dist(&x, &y, &cfg).map_err(err)?;
            let dyx = orbit_dist(&y, &x, &cfg).map_err(err)?;
            let dyz = orbit_dist(&y, &z, &cfg).map_err(err)?;
            let dxz = orbit_dist(&x, &z, &cfg).map_err(err)?;
            self_max = self_max.max(dxx);
            sym_max = sym_max.max((dxy - dyx).abs());
            tri_max = tri_max.max(dxz - dxy - dyz);
            ensure(dxx < 1e-8, || {
                format!("d(X,X) = {dxx:e} at {m}x{k} seed {seed}")
            })?;
            ensure((dxy - dyx).abs() < 1e-6, || {
                format!("asymmetry at {m}x{k} seed {seed}")
            })?;
            ensure(dxz <= dxy + dyz + 2e-6, || {
                format!(
                    "triangle violated by {:e} at {m}x{k} seed {seed}",
                    dxz - dxy - dyz
                )
            })?;
        }
    }
    Ok(format!(
        "max d(X,X) {self_max:.1e}, max asymmetry {sym_max:.1e}, worst triangle slack {tri_max:.2e}"
    ))
}

// 2
fn two_column_gap() -> Check {
    let cfg = SolverConfig::default();
    let x =
        UnitRowMatrix::from_row_slice(4, 2, &[-1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, -1.0]).unwrap();
    let y =
        UnitRowMatrix::from_row_slice(4, 2, &[1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, -1.0]).unwrap();
    let bound = PI / SQRT_2;
    let solver = orbit_dist(&orbit(x.clone()), &orbit(y.clone()), &cfg).map_err(err)?;
    let grid = o2_grid_distance(&x, &y, GridSpec::new(10_000, true).map_err(err)?).map_err(err)?;
    ensure((solver - grid.distance).abs() < 1e-4, || {
        format!("solver {solver} vs grid {}", grid.distance)
    })?;
    ensure(solver > bound && grid.distance > bound, || {
        format!("no gap: solver {solver}, grid {}", grid.distance)
    })?;
    let x3 = k_embedding(&orbit(x), 3).map_err(err)?;
    let y3 = k_embedding(&orbit(y), 3).map_err(err)?;
    let d3 = orbit_dist(&x3, &y3, &cfg).map_err(err)?;
    ensure(d3 <= bound + 1e-6, || {
        format!("k=3 distance {d3} exceeds {bound}")
    })?;
    Ok(format!(
        "d2 solver {solver:.8}, grid {:.8}, margin over pi/sqrt2 {:.6}; d3 {d3:.8}",
        grid.distance,
        solver.min(grid.distance) - bound
    ))
}

fn rank_one_factor(m: usize, k: usize, r: &mut ChaCha8Rng) -> UnitRowMatrix {
    let dir: DVector<f64> = DVector::from_fn(k, |_, _| r.sample(StandardNormal));
    let dir = dir.normalize();
    let mut x = DMatrix::zeros(m, k);
    for i in 0..m {
        let s = if r.random_bool(0.5) { 1.0 } else { -1.0 };
        x.set_row(i, &(dir.transpose() * s));
    }
    UnitRowMatrix::new(x).unwrap()
}

// 3
fn k_monotonicity() -> Check {
    let cfg = SolverConfig::default();
    let mut worst = f64::NEG_INFINITY;
    for seed in 0..30 {
        let mut r = rng(3000 + seed);
        let draw = |r: &mut ChaCha8Rng, rank1: bool| {
            if rank1 {
                rank_one_factor(5, 2, r)
            } else {
                random_factor(5, 2, r)
            }
        };
        let x = draw(&mut r, seed % 5 == 0);
        let y = draw(&mut r, seed % 7 == 0);
        let d2 = orbit_dist(&orbit(x.clone()), &orbit(y.clone()), &cfg).map_err(err)?;
        let d3 = orbit_dist(
            &k_embedding(&orbit(x), 3).map_err(err)?,
            &k_embedding(&orbit(y), 3).map_err(err)?,
            &cfg,
        )
        .map_err(err)?;
        worst = worst.max(d3 - d2);
        ensure(d3 <= d2 + 1e-5, || {
            format!("seed {seed}: d3 {d3} > d2 {d2}")
        })?;
    }
    Ok(format!("max d3 - d2 = {worst:.2e}"))
}

fn skew_basis(k: usize) -> Vec<DMatrix<f64>> {
    let mut out = Vec::new();
    for i in 0..k {
        for j in i + 1..k {
            let mut e = DMatrix::zeros(k, k);
            e[(i, j)] = 1.0;
            e[(j, i)] = -1.0;
            out.push(e);
        }
    }
    out
}

fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt();
    let scale: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt().max(1e-12);
    diff / scale
}

// 4
fn gradient_fidelity() -> Check {
    let mut worst_o = 0.0f64;
    let mut worst_s = 0.0f64;
    let mut seed = 4000;
    let mut done = 0;
    while done < 20 {
        seed += 1;
        let mut r = rng(seed);
        let x = random_factor(5, 3, &mut r);
        let y = random_factor(5, 3, &mut r);
        let o = OrthogonalMatrix::random(3, &mut r);
        let xo = x.as_matrix() * o.as_matrix();
        let near_pole = (0..5).any(|i| xo.row(i).dot(&y.as_matrix().row(i)).abs() > 1.0 - 1e-3);
        let p = DVector::from_fn(5, |_, _| r.sample::<f64, _>(StandardNormal)).normalize();
        let points: Vec<DVector<f64>> = (0..4)
            .map(|_| DVector::from_fn(5, |_, _| r.sample::<f64, _>(StandardNormal)).normalize())
            .collect();
        let weights: Vec<f64> = (0..4).map(|_| r.random_range(0.2..2.0)).collect();
        if near_pole || points.iter().any(|q| q.dot(&p).abs() > 1.0 - 1e-3) {
            continue;
        }
        done += 1;

        let (_, g, _) = alignment_gradient(&x, &y, &o);
        let basis: Vec<DMatrix<f64>> = skew_basis(3)
            .into_iter()
            .map(|e| o.as_matrix() * e)
            .collect();
        let analytic: Vec<f64> = basis.iter().map(|b| g.dot(b)).collect();
        let fd = fd_gradient(
            |q: &OrthogonalMatrix| alignment_loss(&x, &y, q),
            &o,
            &basis,
            |q, b, t| og_retract(q, &(b * t)).unwrap(),
            1e-5,
        )
        .map_err(err)?;
        worst_o = worst_o.max(relative_error(&fd.values, &analytic));

        let (sg, _) = frechet_gradient(&p, &points, &weights);
        let mut tangent = Vec::new();
        for i in 0..5 {
            let mut e = DVector::zeros(5);
            e[i] = 1.0;
            e -= &p * p[i];
            for t in &tangent {
                let t: &DVector<f64> = t;
                e -= t * t.dot(&e);
            }
            if e.norm() > 1e-6 {
                tangent.push(e.normalize());
            }
        }
        let analytic: Vec<f64> = tangent.iter().map(|e| sg.dot(e)).collect();
        let fd = fd_gradient(
            |q: &DVector<f64>| frechet_loss(q, &points, &weights),
            &p,
            &tangent,
            |q, e, t| (q + e * t).normalize(),
            1e-5,
        )
        .map_err(err)?;
        worst_s = worst_s.max(relative_error(&fd.values, &analytic));
    }
    ensure(worst_o < 1e-5 && worst_s < 1e-5, || {
        format!("relative errors O(3) {worst_o:e}, S^4 {worst_s:e}")
    })?;
    Ok(format!(
        "max relative error O(3) {worst_o:.1e}, S^4 {worst_s:.1e}"
    ))
}

// 5
fn projection_algebra() -> Check {
    let mut worst = [0.0f64; 6];
    for seed in 0..50 {
        let mut r = rng(5000 + seed);
        let x = random_factor(6, 3, &mut r);
        let w = ps_project(&x, &gaussian(6, 3, &mut r)).map_err(err)?;
        let v = vertical_project(&x, &w).map_err(err)?;
        let h = horizontal_project(&x, &w)
            .map_err(err)?
            .to_product_tangent();
        worst[0] = worst[0].max((v.vec() + h.vec() - w.vec()).norm());
        let vv = vertical_project(&x, &v).map_err(err)?;
        let hh = horizontal_project(&x, &h).map_err(err)?;
        worst[1] = worst[1].max((vv.vec() - v.vec()).norm().max((hh.vec() - h.vec()).norm()));
        worst[2] = worst[2].max(ps_metric(&v, &h).map_err(err)?.abs());
        let a = vertical_coefficient(&x, w.vec()).map_err(err)?;
        let e = x.as_matrix().transpose() * x.as_matrix();
        let xtw = x.as_matrix().transpose() * w.vec();
        worst[3] = worst[3].max((&e * &a + &a * &e - (&xtw - xtw.transpose())).norm());
        let rot = OrthogonalMatrix::random(3, &mut r);
        let xr = x.act(&rot);
        let wr = ProductTangent::new(xr.clone(), w.vec() * rot.as_matrix()).map_err(err)?;
        let vr = vertical_project(&xr, &wr).map_err(err)?;
        worst[4] = worst[4].max((vr.vec() - v.vec() * rot.as_matrix()).norm());
    }
    let limits = [1e-12, 1e-12, 1e-10, 1e-10, 1e-10];
    let names = [
        "sum",
        "idempotence",
        "orthogonality",
        "sylvester",
        "equivariance",
    ];
    for i in 0..5 {
        ensure(worst[i] < limits[i], || {
            format!("{} error {:e}", names[i], worst[i])
        })?;
    }
    Ok(format!(
        "sum {:.1e}, idempotence {:.1e}, orthogonality {:.1e}, sylvester {:.1e}, equivariance {:.1e}",
        worst[0], worst[1], worst[2], worst[3], worst[4]
    ))
}

/// A unit vector at angle `theta` from `x`.
fn at_angle(x: &DVector<f64>, theta: f64, r: &mut ChaCha8Rng) -> DVector<f64> {
    let g = DVector::from_fn(x.len(), |_, _| r.sample::<f64, _>(StandardNormal));
    let u = (&g - x * x.dot(&g)).normalize();
    x * theta.cos() + u * theta.sin()
}

// 6
fn exp_log_round_trips() -> Check {
    let guard = 1e-6;
    let mut sphere_err = 0.0f64;
    let mut product_err = 0.0f64;
    for seed in 0..50 {
        let mut r = rng(6000 + seed);
        let x = DVector::from_fn(4, |_, _| r.sample::<f64, _>(StandardNormal)).normalize();
        let theta = r.random_range(1e-6..PI - 1e-3);
        let y = at_angle(&x, theta, &mut r);
        let px = SpherePoint::new(x.clone()).map_err(err)?;
        let py = SpherePoint::normalized(y).map_err(err)?;
        let v = sphere_log(&px, &py, guard).map_err(err)?;
        let back = sphere_exp(&v);
        sphere_err = sphere_err.max((back.coords() - py.coords()).norm());
        let v2 = sphere_log(&px, &back, guard).map_err(err)?;
        sphere_err = sphere_err.max((v2.vec() - v.vec()).norm());
        let t = SphereTangent::new(px.clone(), v.vec().clone()).map_err(err)?;
        sphere_err = sphere_err.max((sphere_exp(&t).coords() - back.coords()).norm());

        let xm = random_factor(5, 3, &mut r);
        let mut ym = DMatrix::zeros(5, 3);
        for i in 0..5 {
            let th = r.random_range(1e-6..PI - 1e-3);
            ym.set_row(i, &at_angle(&xm.row_vector(i), th, &mut r).transpose());
        }
        let ym = UnitRowMatrix::normalized(ym).map_err(err)?;
        let pv = ps_log(&xm, &ym, guard).map_err(err)?;
        let back = ps_exp(&pv, 1.0);
        product_err = product_err.max((back.as_matrix() - ym.as_matrix()).norm());
        let pv2 = ps_log(&xm, &back, guard).map_err(err)?;
        product_err = product_err.max((pv2.vec() - pv.vec()).norm());
    }
    ensure(sphere_err < 1e-9 && product_err < 1e-9, || {
        format!("sphere {sphere_err:e}, product {product_err:e}")
    })?;

    let cfg = SolverConfig::default();
    let mut orbit_err = 0.0f64;
    for seed in 0..20 {
        let mut r = rng(6500 + seed);
        let x = random_factor(5, 3, &mut r);
        let rot = OrthogonalMatrix::random(3, &mut r);
        let y = orbit(nearby(&x, 0.3, &mut r).act(&rot));
        let x = orbit(x);
        let log = orbit_log(&x, &y, &cfg).map_err(err)?;
        let z = orbit_exp(&x, &log.tangent, 1.0, &cfg).map_err(err)?;
        let d = orbit_dist(&z, &y, &cfg).map_err(err)?;
        orbit_err = orbit_err.max(d);
        ensure(d < 1e-6, || {
            format!("orbit round trip off by {d:e} at seed {seed}")
        })?;
    }
    Ok(format!(
        "sphere {sphere_err:.1e}, product {product_err:.1e}, orbit {orbit_err:.1e}"
    ))
}

/// `m×3` factor of rank `rank`, correlated with `base` so that rows are
/// never close to antipodal.
fn factor_of_rank(
    base: &DMatrix<f64>,
    rank: usize,
    noise: f64,
    r: &mut ChaCha8Rng,
) -> UnitRowMatrix {
    let (m, k) = base.shape();
    let mut x = base + gaussian(m, k, r) * noise;
    for j in rank..k {
        x.column_mut(j).fill(0.0);
    }
    UnitRowMatrix::normalized(x).unwrap()
}

// 7
fn rank_constancy() -> Check {
    let cfg = SolverConfig::default();
    let tol = RankTolerance::default();
    let mut seen = Vec::new();
    for seed in 0..20u64 {
        let mut r = rng(7000 + seed);
        let mut base = gaussian(5, 3, &mut r);
        for i in 0..5 {
            let s = base[(i, 0)].signum();
            base[(i, 0)] = s * (1.0 + base[(i, 0)].abs());
        }
        let r1 = 1 + (seed % 3) as usize;
        let r2 = 1 + ((seed / 3) % 3) as usize;
        let x = orbit(factor_of_rank(&base, r1, 0.3, &mut r));
        let y = orbit(factor_of_rank(&base, r2, 0.3, &mut r));
        let seg = GeodesicSegment::between(&x, &y, &cfg).map_err(err)?;
        let profile = geodesic_rank_profile(&seg, 17, tol).map_err(err)?;
        let interior = profile
            .interior_rank()
            .ok_or_else(|| format!("seed {seed}: interior ranks vary: {:?}", profile.interior))?;
        let endpoint = profile.start.1.max(profile.end.1);
        ensure(interior >= endpoint, || {
            format!("seed {seed}: interior rank {interior} below endpoint rank {endpoint}")
        })?;
        seen.push((profile.start.1, profile.end.1, interior));
    }
    let combos: std::collections::BTreeSet<_> = seen.iter().map(|s| (s.0, s.1)).collect();
    Ok(format!(
        "20 geodesics, endpoint rank pairs covered: {combos:?}"
    ))
}

fn monotone(history: &[f64]) -> bool {
    history.windows(2).all(|w| w[1] <= w[0] + 1e-12)
}

// 8
fn frechet_checks() -> Check {
    let cfg = SolverConfig::default();
    let mut worst_mid = 0.0f64;
    let mut runs = 0;
    for seed in 0..10 {
        let mut r = rng(8000 + seed);
        let x1 = random_factor(5, 3, &mut r);
        let rot = OrthogonalMatrix::random(3, &mut r);
        let x2 = nearby(&x1, 0.25, &mut r).act(&rot);
        let (x1, x2) = (orbit(x1), orbit(x2));
        let set = WeightedSampleSet::uniform(vec![x1.clone(), x2.clone()]).map_err(err)?;
        let rep = frechet_mean(&set, &cfg).map_err(err)?;
        runs += 1;
        ensure(monotone(&rep.loss_history), || {
            format!("seed {seed}: loss increased {:?}", rep.loss_history)
        })?;
        let half = orbit_dist(&x1, &x2, &cfg).map_err(err)? / 2.0;
        for x in [&x1, &x2] {
            let d = orbit_dist(&rep.mean, x, &cfg).map_err(err)?;
            worst_mid = worst_mid.max((d - half).abs());
        }
        ensure(worst_mid < 1e-3, || {
            format!("seed {seed}: midpoint error {worst_mid:e}")
        })?;
    }
    for seed in 0..5 {
        let mut r = rng(8500 + seed);
        let c = random_factor(4, 2, &mut r);
        let pts: Vec<OrbitPoint> = (0..5)
            .map(|_| {
                let rot = OrthogonalMatrix::random(2, &mut r);
                orbit(nearby(&c, 0.4, &mut r).act(&rot))
            })
            .collect();
        let weights: Vec<f64> = (0..5).map(|_| r.random_range(0.5..2.0)).collect();
        let rep =
            frechet_mean(&WeightedSampleSet::new(pts, weights).map_err(err)?, &cfg).map_err(err)?;
        runs += 1;
        ensure(monotone(&rep.loss_history), || {
            format!("cloud {seed}: loss increased")
        })?;
    }
    Ok(format!(
        "{runs} runs monotone; max midpoint error {worst_mid:.1e}"
    ))
}

// 9
fn factorization_round_trip() -> Check {
    let cfg = SolverConfig::default();
    let mut worst_gram = 0.0f64;
    let mut worst_orbit = 0.0f64;
    for seed in 0..30u64 {
        let mut r = rng(9000 + seed);
        let m = 2 + (seed as usize % 7);
        let k0 = 1 + r.random_range(0..m);
        let x0 = if k0 == 1 {
            rank_one_factor(m, 2, &mut r)
        } else {
            random_factor(m, k0, &mut r)
        };
        let z = gram(&x0);
        let x = factorize(&z, m, RankTolerance::default()).map_err(err)?;
        worst_gram = worst_gram.max((gram(&x).entries() - z.entries()).norm());
        let again = factorize(&z, m, RankTolerance::default()).map_err(err)?;
        let d_runs = orbit_dist(&orbit(x.clone()), &orbit(again), &cfg).map_err(err)?;
        let d_truth =
            orbit_dist(&orbit(x), &k_embedding(&orbit(x0), m).map_err(err)?, &cfg).map_err(err)?;
        worst_orbit = worst_orbit.max(d_runs).max(d_truth);
    }
    ensure(worst_gram < 1e-8 && worst_orbit < 1e-6, || {
        format!("gram error {worst_gram:e}, orbit error {worst_orbit:e}")
    })?;
    Ok(format!(
        "max gram error {worst_gram:.1e}, max orbit error {worst_orbit:.1e}"
    ))
}

// 10
fn finite_escape() -> Check {
    let cfg = SolverConfig::default();
    let tol = RankTolerance::default();
    let mut worst = 0.0f64;
    for (m, k) in [(2, 2), (4, 2)] {
        for seed in 0..10 {
            let mut r = rng(10_000 + seed);
            let x = orbit(random_factor(m, k, &mut r));
            let esc = finite_escape_direction(&x, &cfg).map_err(err)?;
            ensure((esc.direction.norm() - 1.0).abs() < 1e-12, || {
                "direction is not unit".into()
            })?;
            let vertical = vertical_project(x.rep(), &esc.direction)
                .map_err(err)?
                .norm();
            ensure(vertical < 1e-6, || {
                format!("direction not horizontal ({vertical:e})")
            })?;
            let (_, t_max) =
                max_full_rank_interval(&x, &esc.direction, 2.0 * PI, tol).map_err(err)?;
            worst = worst.max(t_max);
            ensure(t_max <= PI + 1e-3, || {
                format!("{m}x{k} seed {seed}: escape at {t_max}")
            })?;
        }
    }
    let x = orbit(UnitRowMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]).unwrap());
    let v = ProductTangent::new(
        x.rep().clone(),
        DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]),
    )
    .map_err(err)?;
    let (_, t) = max_full_rank_interval(&x, &v, 2.0 * PI, tol).map_err(err)?;
    ensure((t - FRAC_PI_2).abs() < 1e-4, || format!("collision at {t}"))?;
    Ok(format!(
        "latest escape {worst:.4}; collision case t_max = {t:.7}"
    ))
}

fn write_series(path: &Path, center: &DMatrix<f64>, t: usize, r: &mut ChaCha8Rng) {
    let (m, k) = center.shape();
    let data = gaussian(t, k, r) * center.transpose() + gaussian(t, m, r) * 0.05;
    let mut text: String = (0..m)
        .map(|j| format!("v{j}"))
        .collect::<Vec<_>>()
        .join(",");
    text.push('\n');
    for row in data.row_iter() {
        text.push_str(
            &row.iter()
                .map(|v| format!("{v:.17e}"))
                .collect::<Vec<_>>()
                .join(","),
        );
        text.push('\n');
    }
    std::fs::write(path, text).unwrap();
}

fn run_cli(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_corrgeom"))
        .args(args)
        .output()
        .map_err(err)?;
    ensure(out.status.success(), || {
        format!(
            "corrgeom {args:?} failed: {}",
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

fn read_labeled(path: &Path) -> Result<DMatrix<f64>, String> {
    corrgeom_cli::matrix_io::read_matrix(path)
        .map(|m| m.values)
        .map_err(err)
}

// 11
fn pipeline_determinism() -> Check {
    let dir = tempfile::tempdir().map_err(err)?;
    let root = dir.path();
    let mut r = rng(11_000);
    let mut manifest = String::from("subject_id,path,group\n");
    for s in 0..6 {
        let center = random_factor(4, 4, &mut r);
        write_series(
            &root.join(format!("s{s}.csv")),
            center.as_matrix(),
            120,
            &mut r,
        );
        manifest.push_str(&format!(
            "s{s},s{s}.csv,{}\n",
            if s % 2 == 0 { "a" } else { "b" }
        ));
    }
    std::fs::write(root.join("cohort.csv"), manifest).map_err(err)?;
    let m = root.join("cohort.csv");
    let out1 = root.join("run1");
    let out2 = root.join("run2");
    for out in [&out1, &out2] {
        run_cli(&[
            "dist",
            m.to_str().unwrap(),
            "--seed",
            "7",
            "--no-timing",
            "--out",
            out.to_str().unwrap(),
        ])?;
    }
    for file in ["distances.csv", "dist_report.json"] {
        let a = std::fs::read(out1.join(file)).map_err(err)?;
        let b = std::fs::read(out2.join(file)).map_err(err)?;
        ensure(a == b, || format!("{file} differs between runs"))?;
    }

    let centers = [random_factor(4, 4, &mut r), random_factor(4, 4, &mut r)];
    let mut manifest = String::from("subject_id,path,group\n");
    for (g, c) in centers.iter().enumerate() {
        for s in 0..5 {
            let id = format!("g{g}s{s}");
            write_series(&root.join(format!("{id}.csv")), c.as_matrix(), 400, &mut r);
            manifest.push_str(&format!("{id},{id}.csv,{}\n", ["alpha", "beta"][g]));
        }
    }
    std::fs::write(root.join("planted.csv"), manifest).map_err(err)?;
    let out = root.join("means");
    run_cli(&[
        "mean",
        root.join("planted.csv").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ])?;
    let cfg = SolverConfig::default();
    let center_pts: Vec<OrbitPoint> = centers.iter().map(|c| orbit(c.clone())).collect();
    let mut margins = Vec::new();
    for (g, name) in ["alpha", "beta"].iter().enumerate() {
        let z = read_labeled(&out.join(format!("mean_{name}.csv")))?;
        let z = corrgeom::CorrelationMatrix::new(z).map_err(err)?;
        let mean = orbit(factorize(&z, 4, RankTolerance::default()).map_err(err)?);
        let own = orbit_dist(&mean, &center_pts[g], &cfg).map_err(err)?;
        let other = orbit_dist(&mean, &center_pts[1 - g], &cfg).map_err(err)?;
        ensure(own < other, || {
            format!("group {name}: own {own} vs other {other}")
        })?;
        margins.push(format!("{name} {own:.3} < {other:.3}"));
    }
    Ok(format!(
        "repeat runs byte-identical; planted centers: {}",
        margins.join(", ")
    ))
}

fn main() {
    type Criterion = (usize, &'static str, Option<u64>, fn() -> Check);
    let criteria: [Criterion; 11] = [
        (1, "metric axioms", Some(30), metric_axioms),
        (
            2,
            "strict gap on the two-column counterexample",
            Some(10),
            two_column_gap,
        ),
        (3, "k-monotonicity sweep", Some(60), k_monotonicity),
        (4, "gradient fidelity", Some(10), gradient_fidelity),
        (5, "projection algebra", None, projection_algebra),
        (6, "exp/log round trips", Some(60), exp_log_round_trips),
        (7, "rank constancy on geodesics", None, rank_constancy),
        (
            8,
            "Frechet mean monotonicity and midpoint",
            None,
            frechet_checks,
        ),
        (
            9,
            "factorization round trip",
            None,
            factorization_round_trip,
        ),
        (10, "finite escape time", None, finite_escape),
        (
            11,
            "pipeline determinism and planted centers",
            Some(120),
            pipeline_determinism,
        ),
    ];
    let mut failures = 0;
    for (n, name, budget, check) in criteria {
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let over = budget.filter(|b| elapsed > Duration::from_secs(*b));
        let (status, detail) = match (&result, over) {
            (Ok(d), None) => ("PASS", d.clone()),
            (Ok(d), Some(b)) => ("FAIL", format!("{d}; exceeded {b} s budget")),
            (Err(e), _) => ("FAIL", e.clone()),
        };
        if status == "FAIL" {
            failures += 1;
        }
        println!(
            "[{status}] criterion {n:>2}: {name} ({:.2} s) | {detail}",
            elapsed.as_secs_f64()
        );
    }
    println!("acceptance: {} of 11 criteria passed", 11 - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
