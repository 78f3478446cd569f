//! Minimal Neural Engineering Framework substrate: LIF tuning curves,
//! encoder/gain/bias fitting, regularized least-squares decoders, and a
//! spiking simulation whose filtered decode must agree with rate mode.
//!
//! The classifier projects flattened images onto a low-dimensional seeded
//! random subspace, encodes the projection in one LIF ensemble, and decodes
//! one-hot class scores.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::fault::{FaultLabel, NUM_CLASSES};
use crate::imaging::LabeledSample;
use crate::nb::argmax_label;
use crate::rng;

/// Leaky integrate-and-fire neuron constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LifParams {
    /// Membrane time constant, seconds.
    pub tau_rc: f64,
    /// Refractory period, seconds.
    pub tau_ref: f64,
}

impl Default for LifParams {
    fn default() -> Self {
        LifParams {
            tau_rc: 0.02,
            tau_ref: 0.002,
        }
    }
}

/// Steady-state LIF firing rate in Hz for a constant input current J.
/// Zero at and below threshold (J <= 1), approaching 1/tau_ref as J grows.
pub fn lif_rate(j: f64, p: &LifParams) -> f64 {
    if j <= 1.0 {
        return 0.0;
    }
    1.0 / (p.tau_ref - p.tau_rc * (1.0 - 1.0 / j).ln())
}

/// Gain and bias so the neuron fires at `max_rate` when the encoded
/// projection e.x = 1 and sits exactly at threshold when e.x = intercept.
pub fn solve_gain_bias(max_rate_hz: f64, intercept: f64, p: &LifParams) -> Result<(f64, f64)> {
    if max_rate_hz >= 1.0 / p.tau_ref {
        return Err(Error::invalid(format!(
            "max rate {max_rate_hz} Hz is unreachable for tau_ref {}",
            p.tau_ref
        )));
    }
    if max_rate_hz <= 0.0 {
        return Err(Error::invalid("max rate must be positive"));
    }
    if !(-1.0..1.0).contains(&intercept) {
        return Err(Error::invalid("intercept must lie in [-1, 1)"));
    }
    let j_max = 1.0 / (1.0 - ((p.tau_ref - 1.0 / max_rate_hz) / p.tau_rc).exp());
    let gain = (j_max - 1.0) / (1.0 - intercept);
    let bias = 1.0 - gain * intercept;
    Ok((gain, bias))
}

/// A population of LIF neurons encoding a `dim`-dimensional vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub n_neurons: usize,
    pub dim: usize,
    /// Unit-norm encoder rows, n x dim.
    pub encoders: Vec<f64>,
    pub gains: Vec<f64>,
    pub biases: Vec<f64>,
    pub max_rates: Vec<f64>,
    pub intercepts: Vec<f64>,
    pub lif: LifParams,
}

impl Ensemble {
    /// Seeded construction: random unit encoders, max rates uniform in
    /// [200, 400) Hz, intercepts uniform in (-0.95, 0.95), gains and biases
    /// solved per neuron.
    pub fn new(n_neurons: usize, dim: usize, lif: LifParams, seed: u64) -> Result<Ensemble> {
        if n_neurons == 0 || dim == 0 {
            return Err(Error::invalid("ensemble needs neurons and a dimension"));
        }
        let mut rng = rng::stream_rng(seed, 0xE5E);
        let mut encoders = Vec::with_capacity(n_neurons * dim);
        for _ in 0..n_neurons {
            loop {
                let row: Vec<f64> = (0..dim)
                    .map(|_| rng.sample::<f64, _>(StandardNormal))
                    .collect();
                let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm > 1e-12 {
                    encoders.extend(row.iter().map(|v| v / norm));
                    break;
                }
            }
        }
        let max_rates: Vec<f64> = (0..n_neurons)
            .map(|_| rng.random_range(200.0..400.0))
            .collect();
        let intercepts: Vec<f64> = (0..n_neurons)
            .map(|_| rng.random_range(-0.95..0.95))
            .collect();
        let mut gains = Vec::with_capacity(n_neurons);
        let mut biases = Vec::with_capacity(n_neurons);
        for i in 0..n_neurons {
            let (gain, bias) = solve_gain_bias(max_rates[i], intercepts[i], &lif)?;
            gains.push(gain);
            biases.push(bias);
        }
        Ok(Ensemble {
            n_neurons,
            dim,
            encoders,
            gains,
            biases,
            max_rates,
            intercepts,
            lif,
        })
    }

    /// Input currents J_i = gain_i * (e_i . x) + bias_i.
    pub fn currents(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim {
            return Err(Error::invalid(format!(
                "input dimension {} does not match ensemble ({})",
                x.len(),
                self.dim
            )));
        }
        let mut out = Vec::with_capacity(self.n_neurons);
        for i in 0..self.n_neurons {
            let row = &self.encoders[i * self.dim..(i + 1) * self.dim];
            let mut dot = 0.0;
            for (e, v) in row.iter().zip(x) {
                dot += e * v;
            }
            out.push(self.gains[i] * dot + self.biases[i]);
        }
        Ok(out)
    }

    /// Steady-state firing rates at input x.
    pub fn rates(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self
            .currents(x)?
            .iter()
            .map(|&j| lif_rate(j, &self.lif))
            .collect())
    }
}

/// Solve ridge-regularized decoders: (A^T A + lambda I) D = A^T T with
/// lambda = (reg * max|A|)^2 * n_eval. A is rates at the eval points
/// (n_eval x n), T the targets (n_eval x out_dim), D the result (n x out).
pub fn solve_decoders(
    ensemble: &Ensemble,
    eval_points: &[Vec<f64>],
    targets: &[Vec<f64>],
    reg: f64,
) -> Result<Vec<f64>> {
    if eval_points.len() < 2 {
        return Err(Error::invalid("need at least 2 evaluation points"));
    }
    if eval_points.len() != targets.len() {
        return Err(Error::invalid("eval point and target counts differ"));
    }
    if reg < 0.0 {
        return Err(Error::invalid("regularization must be non-negative"));
    }
    let out_dim = targets[0].len();
    if out_dim == 0 || targets.iter().any(|t| t.len() != out_dim) {
        return Err(Error::invalid("inconsistent target dimensions"));
    }
    let n = ensemble.n_neurons;
    let n_eval = eval_points.len();
    let mut activities = Vec::with_capacity(n_eval);
    let mut a_max = 0.0f64;
    for point in eval_points {
        let rates = ensemble.rates(point)?;
        for &r in &rates {
            a_max = a_max.max(r.abs());
        }
        activities.push(rates);
    }
    if a_max == 0.0 {
        return Err(Error::invalid(
            "all neurons silent over the evaluation points",
        ));
    }
    let lambda = (reg * a_max).powi(2) * n_eval as f64;

    // Gram matrix and right-hand side, accumulated row by row.
    let mut gram = vec![0.0; n * n];
    let mut rhs = vec![0.0; n * out_dim];
    for (rates, target) in activities.iter().zip(targets) {
        for i in 0..n {
            let a_i = rates[i];
            if a_i == 0.0 {
                continue;
            }
            let row = &mut gram[i * n..(i + 1) * n];
            for (g, &a_j) in row.iter_mut().zip(rates) {
                *g += a_i * a_j;
            }
            let rhs_row = &mut rhs[i * out_dim..(i + 1) * out_dim];
            for (r, &t) in rhs_row.iter_mut().zip(target) {
                *r += a_i * t;
            }
        }
    }
    for i in 0..n {
        gram[i * n + i] += lambda;
    }
    cholesky_solve(&mut gram, &mut rhs, n, out_dim)?;
    Ok(rhs)
}

/// In-place Cholesky factorization and solve for the symmetric
/// positive-definite system M X = B; B is overwritten with X (n x k).
fn cholesky_solve(m: &mut [f64], b: &mut [f64], n: usize, k: usize) -> Result<()> {
    for i in 0..n {
        for j in 0..=i {
            let mut sum = m[i * n + j];
            for l in 0..j {
                sum -= m[i * n + l] * m[j * n + l];
            }
            if i == j {
                if sum <= 0.0 {
                    return Err(Error::invalid("decoder system is not positive definite"));
                }
                m[i * n + i] = sum.sqrt();
            } else {
                m[i * n + j] = sum / m[j * n + j];
            }
        }
    }
    // Forward substitution L y = b, then back substitution L^T x = y.
    for col in 0..k {
        for i in 0..n {
            let mut sum = b[i * k + col];
            for l in 0..i {
                sum -= m[i * n + l] * b[l * k + col];
            }
            b[i * k + col] = sum / m[i * n + i];
        }
        for i in (0..n).rev() {
            let mut sum = b[i * k + col];
            for l in (i + 1)..n {
                sum -= m[l * n + i] * b[l * k + col];
            }
            b[i * k + col] = sum / m[i * n + i];
        }
    }
    Ok(())
}

/// Constant-valued input source.
#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub value: Vec<f64>,
}

/// Decoded link out of an ensemble: decoders plus the synaptic filter used
/// in spiking mode.
#[derive(Debug, Clone, PartialEq)]
pub struct Connection {
    /// n_neurons x out_dim decoder matrix, row-major.
    pub decoders: Vec<f64>,
    pub out_dim: usize,
    /// First-order synapse time constant, seconds.
    pub synapse_tau: f64,
}

impl Connection {
    /// Decode a rate (or spike) activity vector through the decoders.
    pub fn decode(&self, activity: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.out_dim];
        for (i, &a) in activity.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            let row = &self.decoders[i * self.out_dim..(i + 1) * self.out_dim];
            for (o, &d) in out.iter_mut().zip(row) {
                *o += a * d;
            }
        }
        out
    }
}

/// Periodic tap on the decoded signal during a spiking run.
#[derive(Debug, Clone, PartialEq)]
pub struct Probe {
    /// Sampling period in steps (multiples of dt).
    pub every_steps: usize,
    /// (time, decoded vector) records.
    pub records: Vec<(f64, Vec<f64>)>,
}

impl Probe {
    /// Write the probe records as CSV: t, then one column per component.
    pub fn write_csv<W: std::io::Write>(&self, sink: &mut W) -> Result<()> {
        for (t, values) in &self.records {
            let mut line = format!("{t:.6}");
            for v in values {
                line.push(',');
                line.push_str(&format!("{v:.9}"));
            }
            line.push('\n');
            sink.write_all(line.as_bytes())?;
        }
        Ok(())
    }
}

/// Result of a constant-input spiking run.
#[derive(Debug, Clone)]
pub struct SpikingRun {
    /// Decoded, synapse-filtered output per step (n_steps x out_dim).
    pub decoded: Vec<Vec<f64>>,
    pub spike_counts: Vec<u64>,
    pub probe: Probe,
    pub dt: f64,
}

impl SpikingRun {
    /// Mean decoded vector over the last half of the run.
    pub fn steady_decode(&self) -> Vec<f64> {
        let half = self.decoded.len() / 2;
        let tail = &self.decoded[half..];
        let mut mean = vec![0.0; tail[0].len()];
        for row in tail {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= tail.len() as f64;
        }
        mean
    }
}

/// Euler-integrate the ensemble's LIF membranes under a constant input and
/// decode the spike train through the connection's synapse-filtered
/// decoders. Spikes are unit-area impulses (1/dt at the spike step).
pub fn simulate_spiking(
    ensemble: &Ensemble,
    connection: &Connection,
    x: &[f64],
    dt: f64,
    t_total: f64,
    probe_every_steps: usize,
) -> Result<SpikingRun> {
    if dt <= 0.0 {
        return Err(Error::invalid("dt must be positive"));
    }
    let n_steps = (t_total / dt).round() as usize;
    if n_steps < 50 {
        return Err(Error::invalid(
            "simulation window must cover at least 50 steps",
        ));
    }
    if probe_every_steps == 0 {
        return Err(Error::invalid("probe period must be at least one step"));
    }
    let currents = ensemble.currents(x)?;
    let n = ensemble.n_neurons;
    let refractory_steps = (ensemble.lif.tau_ref / dt).round() as u32;
    let synapse_alpha = (-dt / connection.synapse_tau).exp();

    let mut voltage = vec![0.0f64; n];
    let mut refractory = vec![0u32; n];
    let mut spike_counts = vec![0u64; n];
    let mut filtered = vec![0.0f64; connection.out_dim];
    let mut decoded = Vec::with_capacity(n_steps);
    let mut probe = Probe {
        every_steps: probe_every_steps,
        records: Vec::new(),
    };
    let mut spike_impulse = vec![0.0f64; n];
    for step in 0..n_steps {
        for i in 0..n {
            spike_impulse[i] = 0.0;
            if refractory[i] > 0 {
                refractory[i] -= 1;
                voltage[i] = 0.0;
                continue;
            }
            voltage[i] += dt * (currents[i] - voltage[i]) / ensemble.lif.tau_rc;
            if voltage[i] >= 1.0 {
                voltage[i] = 0.0;
                refractory[i] = refractory_steps;
                spike_counts[i] += 1;
                spike_impulse[i] = 1.0 / dt;
            }
        }
        let instant = connection.decode(&spike_impulse);
        for (f, inst) in filtered.iter_mut().zip(&instant) {
            *f = synapse_alpha * *f + (1.0 - synapse_alpha) * inst;
        }
        decoded.push(filtered.clone());
        if (step + 1) % probe_every_steps == 0 {
            probe
                .records
                .push(((step + 1) as f64 * dt, filtered.clone()));
        }
    }
    Ok(SpikingRun {
        decoded,
        spike_counts,
        probe,
        dt,
    })
}

/// NEF-based classifier over flattened images.
#[derive(Debug, Clone, PartialEq)]
pub struct NefClassifier {
    pub num_features: usize,
    pub dim: usize,
    /// dim x num_features random projection, entries +-1/sqrt(num_features).
    pub projection: Vec<f64>,
    /// Per projected coordinate, the training min and max used to rescale
    /// into [-1, 1].
    pub coord_lo: Vec<f64>,
    pub coord_hi: Vec<f64>,
    pub ensemble: Ensemble,
    pub readout: Connection,
}

/// Classifier hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct NefConfig {
    pub projection_dim: usize,
    pub n_neurons: usize,
    pub regularization: f64,
    pub lif: LifParams,
    pub synapse_tau: f64,
    pub seed: u64,
}

impl Default for NefConfig {
    fn default() -> Self {
        NefConfig {
            projection_dim: 32,
            n_neurons: 800,
            regularization: 0.1,
            lif: LifParams::default(),
            synapse_tau: 0.005,
            seed: 0,
        }
    }
}

/// Fit the classifier: seeded random projection, per-coordinate rescale to
/// [-1, 1], one LIF ensemble, and one-hot least-squares decoders over all
/// training points.
pub fn nef_fit_classifier(train: &[LabeledSample], config: &NefConfig) -> Result<NefClassifier> {
    if train.is_empty() {
        return Err(Error::invalid("cannot fit on an empty training set"));
    }
    let num_features = train[0].features.len();
    if config.projection_dim > num_features {
        return Err(Error::invalid(format!(
            "projection dim {} exceeds feature count {num_features}",
            config.projection_dim
        )));
    }
    if train.iter().any(|s| s.features.len() != num_features) {
        return Err(Error::invalid("inconsistent feature lengths in training set"));
    }
    let dim = config.projection_dim;
    let mut rng = rng::stream_rng(config.seed, 0x21A7);
    let scale = 1.0 / (num_features as f64).sqrt();
    let projection: Vec<f64> = (0..dim * num_features)
        .map(|_| if rng.random::<bool>() { scale } else { -scale })
        .collect();

    let projected: Vec<Vec<f64>> = train
        .iter()
        .map(|s| project(&projection, dim, num_features, &s.features))
        .collect();
    let mut coord_lo = vec![f64::INFINITY; dim];
    let mut coord_hi = vec![f64::NEG_INFINITY; dim];
    for p in &projected {
        for d in 0..dim {
            coord_lo[d] = coord_lo[d].min(p[d]);
            coord_hi[d] = coord_hi[d].max(p[d]);
        }
    }
    let eval_points: Vec<Vec<f64>> = projected
        .iter()
        .map(|p| rescale(p, &coord_lo, &coord_hi))
        .collect();
    let targets: Vec<Vec<f64>> = train
        .iter()
        .map(|s| {
            let mut t = vec![0.0; NUM_CLASSES];
            t[s.label.code() as usize] = 1.0;
            t
        })
        .collect();

    let ensemble = Ensemble::new(config.n_neurons, dim, config.lif, config.seed)?;
    let decoders = solve_decoders(&ensemble, &eval_points, &targets, config.regularization)?;
    Ok(NefClassifier {
        num_features,
        dim,
        projection,
        coord_lo,
        coord_hi,
        ensemble,
        readout: Connection {
            decoders,
            out_dim: NUM_CLASSES,
            synapse_tau: config.synapse_tau,
        },
    })
}

fn project(projection: &[f64], dim: usize, num_features: usize, features: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; dim];
    for (d, o) in out.iter_mut().enumerate() {
        let row = &projection[d * num_features..(d + 1) * num_features];
        let mut acc = 0.0;
        for (p, f) in row.iter().zip(features) {
            acc += p * f;
        }
        *o = acc;
    }
    out
}

fn rescale(p: &[f64], lo: &[f64], hi: &[f64]) -> Vec<f64> {
    p.iter()
        .zip(lo.iter().zip(hi))
        .map(|(&v, (&l, &h))| {
            if h > l {
                2.0 * (v - l) / (h - l) - 1.0
            } else {
                0.0
            }
        })
        .collect()
}

impl NefClassifier {
    /// Project and rescale a feature vector into the encoded space.
    pub fn encode_input(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.num_features {
            return Err(Error::invalid(format!(
                "feature length {} does not match model ({})",
                x.len(),
                self.num_features
            )));
        }
        let p = project(&self.projection, self.dim, self.num_features, x);
        Ok(rescale(&p, &self.coord_lo, &self.coord_hi))
    }

    /// Decoded class scores in rate mode.
    pub fn scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        let encoded = self.encode_input(x)?;
        let rates = self.ensemble.rates(&encoded)?;
        Ok(self.readout.decode(&rates))
    }

    /// Rate-mode classification: argmax of the decoded one-hot scores.
    pub fn predict_rate(&self, x: &[f64]) -> Result<FaultLabel> {
        let scores = self.scores(x)?;
        let mut arr = [f64::NEG_INFINITY; NUM_CLASSES];
        arr.copy_from_slice(&scores);
        Ok(argmax_label(&arr))
    }

    /// Spiking-mode classification: run the LIF simulation on the constant
    /// encoded input and argmax the time-averaged decode of the last half
    /// window.
    pub fn predict_spiking(&self, x: &[f64], dt: f64, t_total: f64) -> Result<FaultLabel> {
        let encoded = self.encode_input(x)?;
        let run = simulate_spiking(&self.ensemble, &self.readout, &encoded, dt, t_total, 1)?;
        let decode = run.steady_decode();
        let mut arr = [f64::NEG_INFINITY; NUM_CLASSES];
        arr.copy_from_slice(&decode);
        Ok(argmax_label(&arr))
    }
}
