//! Rank-1 tensor approximation power iteration over the pairwise affinity tensor.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::DenseTensor;

/// Contraction constants below this magnitude are treated as degenerate.
pub const MIN_CONTRACTION: f64 = 1e-30;

/// Iterates and partial contractions of one power-iteration step.
///
/// The linear fields are the exponentials of the log fields and may underflow
/// to zero once the iteration concentrates.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerStep<T> {
    /// `x^(k)(n)` for every pair.
    pub x: Vec<Vec<T>>,
    /// `g^(k)(n)`: the tensor contracted with every vector except the k-th.
    pub partial: Vec<Vec<T>>,
    /// Full contraction `C^(n)`.
    pub normalizer: T,
    pub log_x: Vec<Vec<T>>,
    pub log_partial: Vec<Vec<T>>,
    pub log_normalizer: T,
}

/// Output of the forward pass: final local assignment vectors plus history.
#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentState<T> {
    pub x: Vec<Vec<T>>,
    pub log_x: Vec<Vec<T>>,
    pub history: Vec<PowerStep<T>>,
}

impl<T: Scalar> AssignmentState<T> {
    pub fn iterations(&self) -> usize {
        self.history.len()
    }

    /// `x(n)` for `n` in `0..=N`.
    pub fn iterate(&self, n: usize) -> &[Vec<T>] {
        if n == self.history.len() {
            &self.x
        } else {
            &self.history[n].x
        }
    }

    /// `ln x(n)` for `n` in `0..=N`.
    pub fn log_iterate(&self, n: usize) -> &[Vec<T>] {
        if n == self.history.len() {
            &self.log_x
        } else {
            &self.history[n].log_x
        }
    }
}

/// Products of `x_m[j_m]` over all `m`, and over all `m != k` for each `k`.
fn products<T: Scalar>(x: &[Vec<T>], j: &[usize], except: &mut [T]) -> T {
    let order = j.len();
    let mut prefix = T::one();
    for k in 0..order {
        except[k] = prefix;
        prefix *= x[k][j[k]];
    }
    let mut suffix = T::one();
    for k in (0..order).rev() {
        except[k] *= suffix;
        suffix *= x[k][j[k]];
    }
    prefix
}

/// Log-domain counterpart of [`products`]: sums instead of products.
fn log_sums<T: Scalar>(l: &[Vec<T>], j: &[usize], except: &mut [T]) -> T {
    let order = j.len();
    let mut prefix = T::zero();
    for k in 0..order {
        except[k] = prefix;
        prefix += l[k][j[k]];
    }
    let mut suffix = T::zero();
    for k in (0..order).rev() {
        except[k] += suffix;
        suffix += l[k][j[k]];
    }
    prefix
}

/// Streaming log-sum-exp.
#[derive(Debug, Clone, Copy)]
struct LogSum<T> {
    max: T,
    sum: T,
}

impl<T: Scalar> LogSum<T> {
    fn new() -> Self {
        Self { max: T::neg_infinity(), sum: T::zero() }
    }

    fn add(&mut self, v: T) {
        if v == T::neg_infinity() {
            return;
        }
        if v > self.max {
            self.sum = self.sum * (self.max - v).exp() + T::one();
            self.max = v;
        } else {
            self.sum += (v - self.max).exp();
        }
    }

    fn value(&self) -> T {
        if self.max == T::neg_infinity() {
            T::neg_infinity()
        } else {
            self.max + self.sum.ln()
        }
    }
}

/// Nonzero entries of `a` as (multi-index, ln a).
fn support<T: Scalar>(a: &DenseTensor<T>) -> Vec<(Vec<usize>, T)> {
    let mut j = vec![0usize; a.order()];
    a.data()
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > T::zero())
        .map(|(off, &v)| {
            a.unravel_into(off, &mut j);
            (j.clone(), v.ln())
        })
        .collect()
}

/// Runs `iterations` synchronous power-iteration updates starting from all-ones.
///
/// Each step maps `x^(k)_j -> x^(k)_j g^(k)_j / C`, every pair reading the
/// same iteration-`n` vectors. The update is carried out on `ln x` so iterates
/// far below the floating-point range keep their ratios.
pub fn power_iteration_forward<T: Scalar>(a: &DenseTensor<T>, iterations: usize) -> Result<AssignmentState<T>> {
    if iterations == 0 {
        return Err(Error::Contract("power iteration needs at least one step".into()));
    }
    if !a.all_finite() {
        return Err(Error::Numeric("affinity tensor contains non-finite entries".into()));
    }
    if a.data().iter().any(|&v| v < T::zero()) {
        return Err(Error::Contract("affinity tensor must be nonnegative".into()));
    }
    let shape = a.shape().to_vec();
    let order = shape.len();
    let entries = support(a);
    let exp_all = |l: &[Vec<T>]| -> Vec<Vec<T>> { l.iter().map(|v| v.iter().map(|x| x.exp()).collect()).collect() };
    let mut l: Vec<Vec<T>> = shape.iter().map(|&n| vec![T::zero(); n]).collect();
    let mut history = Vec::with_capacity(iterations);
    let mut except = vec![T::zero(); order];

    for n in 0..iterations {
        let mut partial: Vec<Vec<LogSum<T>>> = shape.iter().map(|&d| vec![LogSum::new(); d]).collect();
        let mut total = LogSum::new();
        for (j, log_a) in &entries {
            total.add(*log_a + log_sums(&l, j, &mut except));
            for k in 0..order {
                partial[k][j[k]].add(*log_a + except[k]);
            }
        }
        let log_c = total.value();
        let normalizer = log_c.exp();
        if log_c.is_nan() || normalizer == T::infinity() {
            return Err(Error::Numeric(format!("contraction at power iteration {n} is {normalizer}")));
        }
        if normalizer < T::lit(MIN_CONTRACTION) {
            return Err(Error::DegenerateContraction { iteration: n, value: normalizer.to_f64_lossy() });
        }
        let log_partial: Vec<Vec<T>> = partial.iter().map(|v| v.iter().map(LogSum::value).collect()).collect();
        let next: Vec<Vec<T>> = l
            .iter()
            .zip(&log_partial)
            .map(|(lk, gk)| lk.iter().zip(gk).map(|(&li, &gi)| li + gi - log_c).collect())
            .collect();
        if next.iter().flatten().any(|v| v.is_nan() || *v == T::infinity()) {
            return Err(Error::Numeric(format!("iterate {} is not finite", n + 1)));
        }
        let log_x = std::mem::replace(&mut l, next);
        history.push(PowerStep {
            x: exp_all(&log_x),
            partial: exp_all(&log_partial),
            normalizer,
            log_x,
            log_partial,
            log_normalizer: log_c,
        });
    }
    Ok(AssignmentState { x: exp_all(&l), log_x: l, history })
}

/// Reverse pass of [`power_iteration_forward`].
///
/// Returns `dL/dA` over every entry of `a` and `dL/dx(0)`.
pub fn power_iteration_backward<T: Scalar>(
    a: &DenseTensor<T>,
    state: &AssignmentState<T>,
    dl_dx_final: &[Vec<T>],
) -> Result<(DenseTensor<T>, Vec<Vec<T>>)> {
    let shape = a.shape();
    let order = shape.len();
    if state.history.is_empty() {
        return Err(Error::Contract("power-iteration history is empty".into()));
    }
    let lengths_ok = |v: &[Vec<T>]| v.len() == order && v.iter().zip(shape).all(|(x, &n)| x.len() == n);
    if !lengths_ok(dl_dx_final) || !lengths_ok(&state.x) || state.history.iter().any(|s| !lengths_ok(&s.x) || !lengths_ok(&s.partial)) {
        return Err(Error::Contract("gradient or history does not match the tensor shape".into()));
    }

    let mut dl_da = DenseTensor::zeros(shape);
    let mut upstream: Vec<Vec<T>> = dl_dx_final.to_vec();
    let mut j = vec![0usize; order];
    let mut except = vec![T::zero(); order];

    for n in (0..state.history.len()).rev() {
        let step = &state.history[n];
        let next_x = state.iterate(n + 1);
        let c = step.normalizer;
        // s_k = x^(k)(n+1) . dL/dx^(k)(n+1)
        let s: Vec<T> = next_x
            .iter()
            .zip(&upstream)
            .map(|(xk, gk)| xk.iter().zip(gk).map(|(&a, &b)| a * b).sum())
            .collect();
        let s_total: T = s.iter().copied().sum();

        let mut cross: Vec<Vec<T>> = shape.iter().map(|&d| vec![T::zero(); d]).collect();
        for (off, &v) in a.data().iter().enumerate() {
            a.unravel_into(off, &mut j);
            let all = products(&step.x, &j, &mut except);
            let signal: T = (0..order).map(|k| upstream[k][j[k]] - s[k]).sum();
            dl_da.data_mut()[off] += all / c * signal;
            if v == T::zero() {
                continue;
            }
            let total_up: T = (0..order).map(|m| upstream[m][j[m]]).sum();
            for k in 0..order {
                cross[k][j[k]] += v * except[k] * (total_up - upstream[k][j[k]]);
            }
        }

        let prev: Vec<Vec<T>> = (0..order)
            .map(|k| {
                (0..shape[k])
                    .map(|i| (step.partial[k][i] * (upstream[k][i] - s_total) + cross[k][i]) / c)
                    .collect()
            })
            .collect();
        upstream = prev;
    }
    Ok((dl_da, upstream))
}

/// Reverse pass in log-gradients: takes `u = x(N) * dL/dx(N)` and returns `dL/dA`.
///
/// Every factor is a ratio of contractions bounded by one, so the result stays
/// finite where the linear-domain pass would multiply huge upstream gradients
/// by vanishing iterates. Entries of `x` that are exactly zero carry no
/// log-gradient, so `dL/dA` is dropped for entries whose every pair
/// coordinate has zero support.
pub fn power_iteration_backward_log<T: Scalar>(
    a: &DenseTensor<T>,
    state: &AssignmentState<T>,
    u_final: &[Vec<T>],
) -> Result<DenseTensor<T>> {
    let shape = a.shape();
    let order = shape.len();
    if state.history.is_empty() {
        return Err(Error::Contract("power-iteration history is empty".into()));
    }
    let lengths_ok = |v: &[Vec<T>]| v.len() == order && v.iter().zip(shape).all(|(x, &n)| x.len() == n);
    if !lengths_ok(u_final) || !lengths_ok(&state.log_x) || state.history.iter().any(|s| !lengths_ok(&s.log_x)) {
        return Err(Error::Contract("gradient or history does not match the tensor shape".into()));
    }

    let mut dl_da = DenseTensor::zeros(shape);
    let mut upstream: Vec<Vec<T>> = u_final.to_vec();
    let mut j = vec![0usize; order];
    let mut except = vec![T::zero(); order];
    let zero_up = |u: &Vec<Vec<T>>, k: usize, i: usize| u[k][i] == T::zero();

    for n in (0..state.history.len()).rev() {
        let step = &state.history[n];
        let next_x = state.iterate(n + 1);
        let total: T = upstream.iter().flatten().copied().sum();
        let mut prev: Vec<Vec<T>> = (0..order)
            .map(|k| (0..shape[k]).map(|i| upstream[k][i] - total * next_x[k][i]).collect())
            .collect();
        for (off, &v) in a.data().iter().enumerate() {
            a.unravel_into(off, &mut j);
            let all = log_sums(&step.log_x, &j, &mut except);
            // responsibility of this entry for g_m[j_m], divided by a
            let mut grad = if all == T::neg_infinity() { T::zero() } else { -total * (all - step.log_normalizer).exp() };
            for m in 0..order {
                if zero_up(&upstream, m, j[m]) || except[m] == T::neg_infinity() {
                    continue;
                }
                let ratio = (except[m] - step.log_partial[m][j[m]]).exp();
                grad += upstream[m][j[m]] * ratio;
                if v > T::zero() {
                    let rho = v * ratio;
                    for k in (0..order).filter(|&k| k != m) {
                        prev[k][j[k]] += upstream[m][j[m]] * rho;
                    }
                }
            }
            if grad.is_finite() {
                dl_da.data_mut()[off] += grad;
            } else {
                return Err(Error::Numeric(format!("log-domain gradient overflow at power iteration {n}")));
            }
        }
        upstream = prev;
    }
    Ok(dl_da)
}

/// `A x_1 x(1) x_2 ... x_K x(K)`: the multilinear objective on the pairwise tensor.
pub fn contract_full<T: Scalar>(a: &DenseTensor<T>, x: &[Vec<T>]) -> T {
    let mut j = vec![0usize; a.order()];
    let mut except = vec![T::zero(); a.order()];
    let mut total = T::zero();
    for (off, &v) in a.data().iter().enumerate() {
        if v != T::zero() {
            a.unravel_into(off, &mut j);
            total += v * products(x, &j, &mut except);
        }
    }
    total
}
