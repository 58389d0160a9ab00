//! Dormand–Prince 5(4) with step-size control and the standard
//! fourth-order continuous extension.

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub h_init: Option<f64>,
    pub h_max: f64,
    pub max_steps: usize,
}

impl OdeOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self { rtol: tol, atol: tol, h_init: None, h_max: f64::INFINITY, max_steps: 200_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Completed,
    /// The step callback asked to stop.
    Stopped,
    /// The step size fell below the resolvable minimum, or the right-hand
    /// side left its domain and could not be recovered by shrinking.
    Collapsed,
    MaxSteps,
}

#[derive(Debug, Clone)]
pub struct OdeRun<const D: usize> {
    /// Dense-output values at the requested points reached so far.
    pub outputs: Vec<(f64, [f64; D])>,
    pub t_last: f64,
    pub y_last: [f64; D],
    pub outcome: Outcome,
    pub accepted: usize,
    pub rejected: usize,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

fn axpy<const D: usize>(y: &[f64; D], h: f64, terms: &[(f64, &[f64; D])]) -> [f64; D] {
    let mut out = *y;
    for i in 0..D {
        let mut acc = 0.0;
        for (c, k) in terms {
            acc += c * k[i];
        }
        out[i] += h * acc;
    }
    out
}

fn finite<const D: usize>(v: &[f64; D]) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// Integrates y′ = f(t, y) from t0 to t1, reporting dense output at each
/// point of `outputs` (ordered along the direction of integration).
///
/// `f` returns `None` when (t, y) lies outside its domain; the step is then
/// rejected and retried with a smaller size. `on_step` sees every accepted
/// step as (t, y, y′).
pub fn dopri5<const D: usize>(
    f: &mut dyn FnMut(f64, &[f64; D]) -> Option<[f64; D]>,
    t0: f64,
    y0: [f64; D],
    t1: f64,
    outputs: &[f64],
    opts: &OdeOptions,
    on_step: &mut dyn FnMut(f64, &[f64; D], &[f64; D]) -> Control,
) -> OdeRun<D> {
    let dir = if t1 >= t0 { 1.0 } else { -1.0 };
    let mut run = OdeRun {
        outputs: Vec::with_capacity(outputs.len()),
        t_last: t0,
        y_last: y0,
        outcome: Outcome::Completed,
        accepted: 0,
        rejected: 0,
    };
    let mut pending = outputs.iter().copied().peekable();
    while let Some(&to) = pending.peek() {
        if (to - t0) * dir <= 0.0 {
            if to == t0 {
                run.outputs.push((t0, y0));
            }
            pending.next();
        } else {
            break;
        }
    }
    if t1 == t0 {
        return run;
    }
    let Some(mut k1) = f(t0, &y0) else {
        run.outcome = Outcome::Collapsed;
        return run;
    };
    if on_step(t0, &y0, &k1) == Control::Stop {
        run.outcome = Outcome::Stopped;
        return run;
    }

    let sk = |y: &[f64; D], i: usize| opts.atol + opts.rtol * y[i].abs();
    let norm = |v: &[f64; D], y: &[f64; D]| {
        (v.iter().enumerate().map(|(i, x)| (x / sk(y, i)).powi(2)).sum::<f64>() / D as f64).sqrt()
    };
    let span = (t1 - t0).abs();
    let mut h = match opts.h_init {
        Some(h) => h.abs(),
        None => {
            let d0 = norm(&y0, &y0);
            let d1 = norm(&k1, &y0);
            let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
            h0.min(span)
        }
    }
    .min(opts.h_max);

    let (mut t, mut y) = (t0, y0);
    let mut fac_old: f64 = 1e-4;
    loop {
        if run.accepted + run.rejected >= opts.max_steps {
            run.outcome = Outcome::MaxSteps;
            return run;
        }
        let remaining = (t1 - t) * dir;
        if remaining <= 0.0 {
            break;
        }
        let mut last = false;
        if h >= remaining * (1.0 - 1e-12) {
            h = remaining;
            last = true;
        }
        let hmin = 16.0 * f64::EPSILON * t.abs().max(span).max(1e-300);
        if h < hmin {
            run.outcome = Outcome::Collapsed;
            return run;
        }
        let hs = h * dir;

        let stages = (|| {
            let k2 = f(t + C2 * hs, &axpy(&y, hs, &[(A21, &k1)]))?;
            let k3 = f(t + C3 * hs, &axpy(&y, hs, &[(A31, &k1), (A32, &k2)]))?;
            let k4 = f(t + C4 * hs, &axpy(&y, hs, &[(A41, &k1), (A42, &k2), (A43, &k3)]))?;
            let k5 = f(
                t + C5 * hs,
                &axpy(&y, hs, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
            )?;
            let k6 = f(
                t + hs,
                &axpy(&y, hs, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
            )?;
            let y1 = axpy(&y, hs, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
            if !finite(&y1) {
                return None;
            }
            let k7 = f(t + hs, &y1)?;
            Some((k2, k3, k4, k5, k6, k7, y1))
        })();

        let Some((_k2, k3, k4, k5, k6, k7, y1)) = stages else {
            run.rejected += 1;
            h *= 0.25;
            continue;
        };

        let mut err = [0.0; D];
        for i in 0..D {
            err[i] = hs * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        }
        let en = (0..D)
            .map(|i| {
                let sc = opts.atol + opts.rtol * y[i].abs().max(y1[i].abs());
                (err[i] / sc).powi(2)
            })
            .sum::<f64>()
            / D as f64;
        let en = en.sqrt();
        if !en.is_finite() {
            run.rejected += 1;
            h *= 0.25;
            continue;
        }

        if en <= 1.0 {
            // dense output on [t, t + hs]
            let mut rc5 = [0.0; D];
            for i in 0..D {
                rc5[i] =
                    hs * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
            }
            let t_new = if last { t1 } else { t + hs };
            while let Some(&to) = pending.peek() {
                if (to - t_new) * dir > 0.0 {
                    break;
                }
                let th = (to - t) / hs;
                let th1 = 1.0 - th;
                let mut yo = [0.0; D];
                for i in 0..D {
                    let ydiff = y1[i] - y[i];
                    let bspl = hs * k1[i] - ydiff;
                    yo[i] = y[i]
                        + th * (ydiff + th1 * (bspl + th * ((ydiff - hs * k7[i] - bspl) + th1 * rc5[i])));
                }
                run.outputs.push((to, yo));
                pending.next();
            }
            t = t_new;
            y = y1;
            k1 = k7;
            run.accepted += 1;
            run.t_last = t;
            run.y_last = y;
            if on_step(t, &y, &k1) == Control::Stop {
                run.outcome = Outcome::Stopped;
                return run;
            }
            if last {
                break;
            }
            // PI step-size control (Hairer's dopri5 constants)
            let fac11 = en.powf(0.2 - 0.04 * 0.75);
            let fac = (fac11 / fac_old.powf(0.04) / 0.9).clamp(0.1, 5.0);
            fac_old = en.max(1e-4);
            h = (h / fac).min(opts.h_max);
        } else {
            run.rejected += 1;
            h /= (en.powf(0.2) / 0.9).min(10.0);
        }
    }
    run
}
