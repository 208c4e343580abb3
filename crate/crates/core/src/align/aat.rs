//! Almost-affine transforms `f(E_i) = b + c E_i + eps * sum_kl d_kl E_ik E_il`
//! fitted through a frozen decoder.

use alloc::format;
use alloc::vec;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::cone::ConeDecoder;
use crate::derive_seed;
use crate::diff::{adam_step, AdamConfig, AdamState, Tape, Tensor, Var};
use crate::kg::Triple;
use crate::train::{decode_pairs, DecoderModel, DenseLabels, PairIndex, Representation};
use crate::{Error, Result};

/// Quadratic weight used when stitching learned representations into the
/// cone reference decoder.
pub const DEFAULT_REFERENCE_EPSILON: f64 = 0.05;

/// Parameters of an almost-affine map from `d` to `d'` dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct AatParams {
    /// `1 x d'`, shared by every object.
    pub bias: Tensor,
    /// `d' x d`.
    pub linear: Tensor,
    /// `d' x d^2`; column `k * d + l` multiplies `E_ik * E_il`.
    pub quadratic: Tensor,
    pub epsilon: f64,
}

impl AatParams {
    pub fn zeros(d_in: usize, d_out: usize, epsilon: f64) -> Result<Self> {
        let p = AatParams {
            bias: Tensor::zeros(1, d_out),
            linear: Tensor::zeros(d_out, d_in),
            quadratic: Tensor::zeros(d_out, d_in * d_in),
            epsilon,
        };
        p.validate()?;
        Ok(p)
    }

    /// `c` is the `d' x d` identity (truncated or zero-padded) times `scale`.
    pub fn identity_padded(d_in: usize, d_out: usize, scale: f64, epsilon: f64) -> Result<Self> {
        let mut p = Self::zeros(d_in, d_out, epsilon)?;
        for k in 0..d_in.min(d_out) {
            p.linear.set(k, k, scale);
        }
        Ok(p)
    }

    pub fn d_in(&self) -> usize {
        self.linear.cols()
    }

    pub fn d_out(&self) -> usize {
        self.linear.rows()
    }

    pub fn validate(&self) -> Result<()> {
        let (di, d) = (self.d_in(), self.d_out());
        if di == 0 || d == 0 {
            return Err(Error::InvalidParameter(
                "transform dimensions must be positive".into(),
            ));
        }
        if self.bias.shape() != [1, d] || self.quadratic.shape() != [d, di * di] {
            return Err(Error::Shape {
                op: "aat",
                detail: format!(
                    "bias {:?}, linear {:?}, quadratic {:?}",
                    self.bias.shape(),
                    self.linear.shape(),
                    self.quadratic.shape()
                ),
            });
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "epsilon must be a non-negative number, got {}",
                self.epsilon
            )));
        }
        if !(self.bias.is_finite() && self.linear.is_finite() && self.quadratic.is_finite()) {
            return Err(Error::NonFinite("aat parameters"));
        }
        Ok(())
    }

    /// Maps every row of `rep`. With `epsilon == 0` the quadratic term is
    /// not evaluated at all.
    pub fn apply(&self, rep: &Representation) -> Result<Representation> {
        self.validate()?;
        if rep.d() != self.d_in() {
            return Err(Error::Shape {
                op: "aat",
                detail: format!("input dim {} vs transform {}", rep.d(), self.d_in()),
            });
        }
        let mut out = rep.matrix().matmul(&self.linear.transpose())?;
        if self.epsilon > 0.0 {
            let quad = quadratic_features(rep.matrix()).matmul(&self.quadratic.transpose())?;
            out.add_assign(&quad.map(|v| v * self.epsilon));
        }
        let d = self.d_out();
        for (idx, v) in out.data_mut().iter_mut().enumerate() {
            *v += self.bias.data()[idx % d];
        }
        Representation::new(out)
    }
}

/// All pairwise products of a row's coordinates, `n x d^2`.
pub fn quadratic_features(s: &Tensor) -> Tensor {
    let (n, d) = (s.rows(), s.cols());
    let mut q = Tensor::zeros(n, d * d);
    for i in 0..n {
        let row = s.row(i);
        for k in 0..d {
            for l in 0..d {
                q.set(i, k * d + l, row[k] * row[l]);
            }
        }
    }
    q
}

/// A frozen decoder that receives the transformed representation.
#[derive(Debug, Clone, Copy)]
pub enum TargetDecoder<'a> {
    Mlp(&'a DecoderModel),
    /// The cone reference decoder; its width is fitted with the transform.
    Cone(ConeDecoder),
}

impl TargetDecoder<'_> {
    pub fn input_dim(&self) -> usize {
        match self {
            TargetDecoder::Mlp(dec) => dec.embed_dim(),
            TargetDecoder::Cone(_) => 2,
        }
    }

    pub fn outputs(&self) -> usize {
        match self {
            TargetDecoder::Mlp(dec) => dec.outputs(),
            TargetDecoder::Cone(_) => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AatConfig {
    pub steps: usize,
    pub lr: f64,
    /// Number of initializations tried; the best-scoring one wins.
    pub restarts: usize,
    pub seed: u64,
}

impl Default for AatConfig {
    fn default() -> Self {
        AatConfig {
            steps: 1000,
            lr: 0.05,
            restarts: 4,
            seed: 0,
        }
    }
}

impl AatConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 || self.restarts == 0 {
            return Err(Error::InvalidParameter(
                "steps and restarts must be positive".into(),
            ));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "bad learning rate {}",
                self.lr
            )));
        }
        Ok(())
    }
}

/// Outcome of [`fit_aat`].
#[derive(Debug, Clone, PartialEq)]
pub struct AatFit {
    pub params: AatParams,
    /// Fitted width of the cone decoder, when the target is the cone.
    pub cone_width: Option<f64>,
    /// Accuracy through the frozen decoder over the given triples.
    pub es: f64,
    pub loss: f64,
    /// Initializations abandoned because they went non-finite.
    pub failed_restarts: usize,
}

/// Loss, accuracy and gradients of one evaluation of the stitching objective.
#[derive(Debug, Clone, PartialEq)]
pub struct AatEvaluation {
    pub loss: f64,
    pub accuracy: f64,
    /// Gradient with the same layout as the parameters; `epsilon` is copied.
    pub grad: AatParams,
    /// Derivative with respect to `ln w` for the cone target, else zero.
    pub grad_log_width: f64,
}

/// Masked mean cross-entropy of a frozen decoder applied to a transformed
/// source representation.
#[derive(Debug, Clone)]
pub struct AatObjective<'a> {
    source: Tensor,
    quad: Tensor,
    target: TargetDecoder<'a>,
    labels: DenseLabels,
    pairs: PairIndex,
}

impl<'a> AatObjective<'a> {
    pub fn new(
        source: &Representation,
        target: TargetDecoder<'a>,
        triples: &[Triple],
    ) -> Result<Self> {
        let labels = DenseLabels::new(source.n(), target.outputs(), triples)?;
        if labels.count == 0 {
            return Err(Error::InvalidParameter("no triples to fit".into()));
        }
        Ok(AatObjective {
            source: source.matrix().clone(),
            quad: quadratic_features(source.matrix()),
            target,
            labels,
            pairs: PairIndex::all(source.n()),
        })
    }

    fn check(&self, params: &AatParams) -> Result<()> {
        params.validate()?;
        if params.d_in() != self.source.cols() || params.d_out() != self.target.input_dim() {
            return Err(Error::Shape {
                op: "aat",
                detail: format!(
                    "transform {}->{} between source dim {} and decoder dim {}",
                    params.d_in(),
                    params.d_out(),
                    self.source.cols(),
                    self.target.input_dim()
                ),
            });
        }
        Ok(())
    }

    /// Loss, accuracy and gradients at `params`; `log_width` is `ln w` of
    /// the cone target and is ignored for MLP targets.
    pub fn evaluate(&self, params: &AatParams, log_width: f64) -> Result<AatEvaluation> {
        self.check(params)?;
        let mut tape = Tape::new();
        let s = tape.constant(self.source.clone());
        let c = tape.param(params.linear.transpose());
        let b = tape.param(params.bias.clone());
        let mut g = tape.matmul(s, c)?;
        let quad = if params.epsilon > 0.0 {
            let q = tape.constant(self.quad.clone());
            let dq = tape.param(params.quadratic.transpose());
            let qd = tape.matmul(q, dq)?;
            let qd = tape.scale(qd, params.epsilon)?;
            g = tape.add(g, qd)?;
            Some(dq)
        } else {
            None
        };
        let g = tape.add_row_bias(g, b)?;
        let (probs, lw) = match self.target {
            TargetDecoder::Mlp(dec) => {
                let layers = dec.record(&mut tape, false);
                (
                    decode_pairs(&mut tape, g, &layers, dec.activation(), &self.pairs)?,
                    None,
                )
            }
            TargetDecoder::Cone(_) => {
                let lw = tape.param(Tensor::filled(1, 1, log_width));
                (cone_pairs(&mut tape, g, lw, &self.pairs)?, Some(lw))
            }
        };
        let loss = tape.bce_mean(probs, &self.labels.labels, Some(&self.labels.mask))?;
        let accuracy = self.labels.accuracy(tape.value(probs));
        let grads = tape.backward(loss)?;
        let grad_of = |v: Var, like: &Tensor| grads.get_or_zeros(v, like);
        let grad = AatParams {
            bias: grad_of(b, &params.bias),
            linear: grad_of(c, tape.value(c)).transpose(),
            quadratic: match quad {
                Some(dq) => grad_of(dq, tape.value(dq)).transpose(),
                None => Tensor::zeros(params.quadratic.rows(), params.quadratic.cols()),
            },
            epsilon: params.epsilon,
        };
        let grad_log_width = lw
            .map(|v| grad_of(v, tape.value(v)).data()[0])
            .unwrap_or(0.0);
        Ok(AatEvaluation {
            loss: tape.value(loss).data()[0],
            accuracy,
            grad,
            grad_log_width,
        })
    }
}

/// Soft cone probabilities for every pair, `n^2 x 1`.
fn cone_pairs(tape: &mut Tape, g: Var, log_width: Var, pairs: &PairIndex) -> Result<Var> {
    let neg = tape.scale(log_width, -1.0)?;
    let inv_w = tape.exp(neg)?;
    let left = tape.gather_rows(g, &pairs.left)?;
    let right = tape.gather_rows(g, &pairs.right)?;
    let diff = tape.sub(left, right)?;
    let z = tape.scale_by(diff, inv_w)?;
    let s = tape.sigmoid(z)?;
    let s0 = tape.select_col(s, 0)?;
    let s1 = tape.select_col(s, 1)?;
    tape.mul(s1, s0)
}

/// Least-squares affine map from `source` onto `target`, as a starting point.
fn least_squares(
    source: &Representation,
    target: &Representation,
    epsilon: f64,
) -> Result<AatParams> {
    let (n, d, dt) = (source.n(), source.d(), target.d());
    let x = DMatrix::from_fn(n, d + 1, |i, k| if k < d { source.row(i)[k] } else { 1.0 });
    let y = DMatrix::from_fn(n, dt, |i, k| target.row(i)[k]);
    let sol = x
        .svd(true, true)
        .solve(&y, 1e-10)
        .map_err(|e| Error::Degenerate(format!("least squares: {e}")))?;
    let mut p = AatParams::zeros(d, dt, epsilon)?;
    for j in 0..dt {
        for k in 0..d {
            p.linear.set(j, k, sol[(k, j)]);
        }
        p.bias.set(0, j, sol[(d, j)]);
    }
    if !p.linear.is_finite() || !p.bias.is_finite() {
        return Err(Error::Degenerate(
            "least squares produced non-finite values".into(),
        ));
    }
    Ok(p)
}

fn rms_spread(t: &Tensor) -> f64 {
    let c = t.centered();
    if c.is_empty() {
        return 0.0;
    }
    libm::sqrt(c.data().iter().map(|v| v * v).sum::<f64>() / c.len() as f64)
}

/// Starting transform for restart `r`. Restart 0 is the warm start; later
/// restarts rotate it (alternately reflected) in 2-D, or redraw it at the
/// same norm otherwise.
fn restart_init(base: &AatParams, r: usize, restarts: usize, seed: u64) -> AatParams {
    if r == 0 {
        return base.clone();
    }
    let mut p = base.clone();
    if base.d_out() == 2 {
        let turns = restarts.div_ceil(2).max(1);
        let angle = 2.0 * core::f64::consts::PI * (r / 2) as f64 / turns as f64;
        let (sn, cs) = (libm::sin(angle), libm::cos(angle));
        let flip = if r % 2 == 1 { -1.0 } else { 1.0 };
        // M = R(angle) * diag(1, flip)
        let m = [[cs, -sn * flip], [sn, cs * flip]];
        let mut lin = Tensor::zeros(2, base.d_in());
        for (j, row) in m.iter().enumerate() {
            for k in 0..base.d_in() {
                lin.set(
                    j,
                    k,
                    row[0] * base.linear.get(0, k) + row[1] * base.linear.get(1, k),
                );
            }
        }
        let b = base.bias.data();
        p.bias = Tensor::from_vec(
            1,
            2,
            vec![
                m[0][0] * b[0] + m[0][1] * b[1],
                m[1][0] * b[0] + m[1][1] * b[1],
            ],
        )
        .expect("1x2");
        p.linear = lin;
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, r as u64));
        let norm = base.linear.frobenius_norm().max(1e-3);
        let fresh = Tensor::randn(base.d_out(), base.d_in(), 1.0, &mut rng);
        let fnorm = fresh.frobenius_norm().max(1e-12);
        p.linear = fresh.map(|v| v * norm / fnorm);
        p.bias = Tensor::zeros(1, base.d_out());
    }
    p
}

/// Fits an almost-affine map from `source` into the frozen `target` decoder
/// by AdamW on the masked cross-entropy over `triples`.
///
/// With a `paired` representation (the target model's own embeddings for
/// the same objects) the linear part starts from the least-squares map onto
/// it; otherwise from a scaled identity. `cfg.restarts` initializations are
/// tried and the parameters with the highest accuracy seen at any step are
/// returned, ties going to lower loss. Returns [`Error::Diverged`] when
/// every initialization went non-finite.
pub fn fit_aat(
    source: &Representation,
    target: TargetDecoder<'_>,
    paired: Option<&Representation>,
    triples: &[Triple],
    epsilon: f64,
    cfg: &AatConfig,
) -> Result<AatFit> {
    cfg.validate()?;
    let d_out = target.input_dim();
    if let Some(p) = paired {
        if p.n() != source.n() || p.d() != d_out {
            return Err(Error::Shape {
                op: "fit_aat",
                detail: format!(
                    "paired representation {}x{} for {} objects and decoder dim {d_out}",
                    p.n(),
                    p.d(),
                    source.n()
                ),
            });
        }
    }
    let objective = AatObjective::new(source, target, triples)?;
    let base = match paired {
        Some(p) => least_squares(source, p, epsilon)?,
        None => {
            let spread = rms_spread(source.matrix());
            let scale = if spread > 0.0 { 1.0 / spread } else { 1.0 };
            AatParams::identity_padded(source.d(), d_out, scale, epsilon)?
        }
    };
    let is_cone = matches!(target, TargetDecoder::Cone(_));
    let init_log_width = match target {
        TargetDecoder::Cone(c) if paired.is_some() => libm::log(c.width()),
        // Identity start has unit spread; begin with a fairly sharp cone.
        TargetDecoder::Cone(_) => libm::log(0.1),
        TargetDecoder::Mlp(_) => 0.0,
    };
    let adam = AdamConfig::with_lr(cfg.lr);

    let mut best: Option<(f64, f64, AatParams, f64)> = None;
    let mut failed = 0;
    let better = |acc: f64, loss: f64, best: &Option<(f64, f64, AatParams, f64)>| match best {
        None => true,
        Some((ba, bl, _, _)) => acc > *ba || (acc == *ba && loss < *bl),
    };

    'restarts: for r in 0..cfg.restarts {
        let init = restart_init(&base, r, cfg.restarts, cfg.seed);
        let mut tensors = vec![
            init.bias.clone(),
            init.linear.clone(),
            init.quadratic.clone(),
        ];
        if is_cone {
            tensors.push(Tensor::filled(1, 1, init_log_width));
        }
        let mut state = AdamState::new(&tensors);
        for _ in 0..=cfg.steps {
            let current = AatParams {
                bias: tensors[0].clone(),
                linear: tensors[1].clone(),
                quadratic: tensors[2].clone(),
                epsilon,
            };
            let lw = if is_cone { tensors[3].data()[0] } else { 0.0 };
            let eval = match objective.evaluate(&current, lw) {
                Ok(e) if e.loss.is_finite() => e,
                Ok(_) | Err(Error::NonFinite(_)) => {
                    failed += 1;
                    continue 'restarts;
                }
                Err(e) => return Err(e),
            };
            if better(eval.accuracy, eval.loss, &best) {
                best = Some((eval.accuracy, eval.loss, current, lw));
            }
            if eval.accuracy == 1.0 && best.as_ref().is_some_and(|b| b.0 == 1.0) {
                break 'restarts;
            }
            let mut grads = vec![eval.grad.bias, eval.grad.linear, eval.grad.quadratic];
            if is_cone {
                grads.push(Tensor::filled(1, 1, eval.grad_log_width));
            }
            adam_step(&mut tensors, &grads, &mut state, &adam)?;
            if tensors.iter().any(|t| !t.is_finite()) {
                failed += 1;
                continue 'restarts;
            }
        }
    }

    match best {
        Some((es, loss, params, lw)) => Ok(AatFit {
            params,
            cone_width: is_cone.then(|| libm::exp(lw)),
            es,
            loss,
            failed_restarts: failed,
        }),
        None => Err(Error::Diverged(
            "every initialization of the transform went non-finite".into(),
        )),
    }
}
