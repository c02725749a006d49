//! The informed player's optimal random control and simulated matches
//! against uninformed responders.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::game::{GameKind, GameSpec, PayoffGame};
use crate::process::{build_kernel, MartingaleKernel, MartingalePath, PathSampler, SampleMode};
use crate::scalar::{pairwise_sum, MeanSe, Real};
use crate::simplex::{NodeId, SimplexPoint};
use crate::value::ValueTable;

/// Plays `u*(t_k, p(t_k))` along a path drawn from the kernel conditioned on
/// the realized state.
#[derive(Debug, Clone)]
pub struct InformedStrategy<'a, T> {
    pub table: &'a ValueTable<T>,
    pub spec: &'a GameSpec<T>,
    pub kernel: MartingaleKernel<T>,
}

/// Builds the optimal informed strategy from a solved table.
pub fn synthesize_informed<'a, T: Real>(
    table: &'a ValueTable<T>,
    spec: &'a GameSpec<T>,
) -> Result<InformedStrategy<'a, T>> {
    match &spec.kind {
        GameKind::Direct(d) if d.u_star.is_none() => return Err(Error::MissingSaddle),
        _ => {}
    }
    Ok(InformedStrategy {
        table,
        spec,
        kernel: build_kernel(table)?,
    })
}

impl<T: Real> InformedStrategy<'_, T> {
    /// `u*(t_k, p)` at a lattice node.
    pub fn control(&self, k: usize, node: NodeId) -> Result<Vec<T>> {
        let t = self.table.time_grid().knot(k);
        let p = self.table.grid().point(node).coords();
        match &self.spec.kind {
            GameKind::Direct(d) => d
                .u_star
                .as_ref()
                .map(|f| f(t, p))
                .ok_or(Error::MissingSaddle),
            GameKind::Payoff(g) => Ok(g.actions.u(self.spec.u_star_index(t, p)?).to_vec()),
        }
    }

    /// Action index of `u*(t_k, p)` (payoff games).
    pub fn control_index(&self, k: usize, node: NodeId) -> Result<usize> {
        let t = self.table.time_grid().knot(k);
        self.spec
            .u_star_index(t, self.table.grid().point(node).coords())
    }
}

/// Responders for the uninformed player. All observe the public posterior
/// and the informed player's current action; only `Clairvoyant` sees the
/// realized state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UninformedStrategy {
    /// `argmax_v ⟨p_k, ℓ(t_k, u_k, v)⟩`, lowest index on ties.
    PosteriorBestResponse,
    /// Always the action with this index.
    Constant(usize),
    UniformRandom,
    /// `argmax_v ℓ_i(t_k, u_k, v)` for the realized `i`; not a legal
    /// strategy, used as an upper probe.
    Clairvoyant,
}

impl UninformedStrategy {
    pub fn is_legal(&self) -> bool {
        !matches!(self, Self::Clairvoyant)
    }
}

/// The posterior best responder; requires a payoff-based game.
pub fn posterior_best_response<T: Real>(spec: &GameSpec<T>) -> Result<UninformedStrategy> {
    spec.payoff_game()?;
    Ok(UninformedStrategy::PosteriorBestResponse)
}

fn argmax_v<T: Real>(game: &PayoffGame<T>, t: T, u: usize, weights: &[T]) -> usize {
    let mut best = (T::neg_infinity(), 0);
    for v in 0..game.actions.n_v() {
        let x = GameSpec::weighted_payoff(game, t, u, v, weights);
        if x > best.0 {
            best = (x, v);
        }
    }
    best.1
}

/// One simulated episode.
#[derive(Debug, Clone, PartialEq)]
pub struct GameTranscript<T> {
    pub state: usize,
    pub path: MartingalePath,
    pub u: Vec<usize>,
    pub v: Vec<usize>,
    /// `τ ℓ_i(t_k, u_k, v_k)`.
    pub stage_payoffs: Vec<T>,
    pub total: T,
}

/// Outcome of [`play_match`].
#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult<T> {
    pub payoff: MeanSe<T>,
    /// Per state: empirical frequency and payoff statistics given that state.
    pub per_state: Vec<(f64, MeanSe<T>)>,
    /// `|Σ_i freq_i · mean_i − payoff.mean|`.
    pub decomposition_gap: T,
    /// Per episode `⟨p(T), ∫ℓ⟩`.
    pub terminal_pairing: MeanSe<T>,
    /// Per episode `Σ_k τ ⟨p(t_k), ℓ(t_k)⟩`.
    pub running_pairing: MeanSe<T>,
    pub transcripts: Vec<GameTranscript<T>>,
}

struct Episode<T> {
    state: usize,
    total: T,
    terminal_pairing: T,
    running_pairing: T,
    transcript: Option<GameTranscript<T>>,
}

const RESPONDER_STREAM_KEY: u64 = 0x9e37_79b9_7f4a_7c15;

/// Runs `count` episodes from `p0`: `i ~ p₀`, the informed player follows the
/// conditional kernel and plays `u*`, the responder picks `v` each knot.
/// The first `keep` transcripts are returned.
pub fn play_match<T: Real>(
    informed: &InformedStrategy<'_, T>,
    uninformed: UninformedStrategy,
    p0: &SimplexPoint<T>,
    count: usize,
    seed: u64,
    keep: usize,
) -> Result<MatchResult<T>> {
    let spec = informed.spec;
    let game = spec.payoff_game()?;
    if count == 0 {
        return Err(Error::EmptySample);
    }
    if let UninformedStrategy::Constant(v) = uninformed {
        if v >= game.actions.n_v() {
            return Err(Error::InvalidParameters(format!(
                "constant action {v} out of range"
            )));
        }
    }
    let sampler = PathSampler::new(&informed.kernel, p0, SampleMode::Joint, seed)?;
    let table = informed.table;
    let grid = table.grid();
    let tg = table.time_grid();
    let tau = tg.tau();
    let n = tg.steps();
    let dim = spec.dim;
    let episodes: Vec<Episode<T>> = (0..count)
        .into_par_iter()
        .map(|j| -> Result<Episode<T>> {
            let path = sampler.path(j);
            let i = path.state.expect("joint sampling");
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ RESPONDER_STREAM_KEY);
            rng.set_stream(j as u64);
            let mut us = Vec::with_capacity(n);
            let mut vs = Vec::with_capacity(n);
            let mut stages = Vec::with_capacity(n);
            let mut integral = vec![T::zero(); dim];
            let mut running = T::zero();
            let mut onehot = vec![T::zero(); dim];
            onehot[i] = T::one();
            for k in 0..n {
                let t = tg.knot(k);
                let node = path.nodes[k + 1];
                let p = grid.point(node).coords();
                let u = informed.control_index(k, node)?;
                let v = match uninformed {
                    UninformedStrategy::PosteriorBestResponse => argmax_v(game, t, u, p),
                    UninformedStrategy::Constant(v) => v,
                    UninformedStrategy::UniformRandom => rng.gen_range(0..game.actions.n_v()),
                    UninformedStrategy::Clairvoyant => argmax_v(game, t, u, &onehot),
                };
                let mut pairing = T::zero();
                for (s, slot) in integral.iter_mut().enumerate() {
                    let l = (game.payoff)(t, u, v, s);
                    *slot += tau * l;
                    pairing += p[s] * l;
                }
                running += tau * pairing;
                us.push(u);
                vs.push(v);
                stages.push(tau * (game.payoff)(t, u, v, i));
            }
            let total = pairwise_sum(&stages);
            let terminal_pairing = integral[path.terminal];
            let transcript = (j < keep).then_some(GameTranscript {
                state: i,
                path,
                u: us,
                v: vs,
                stage_payoffs: stages,
                total,
            });
            Ok(Episode {
                state: i,
                total,
                terminal_pairing,
                running_pairing: running,
                transcript,
            })
        })
        .collect::<Result<_>>()?;
    let totals: Vec<T> = episodes.iter().map(|e| e.total).collect();
    let payoff = MeanSe::from_samples(&totals);
    let mut per_state = Vec::with_capacity(dim);
    let mut recombined = T::zero();
    for s in 0..dim {
        let xs: Vec<T> = episodes
            .iter()
            .filter(|e| e.state == s)
            .map(|e| e.total)
            .collect();
        let freq = xs.len() as f64 / count as f64;
        let ms = MeanSe::from_samples(&xs);
        if !xs.is_empty() {
            recombined += T::c(freq) * ms.mean;
        }
        per_state.push((freq, ms));
    }
    let tp: Vec<T> = episodes.iter().map(|e| e.terminal_pairing).collect();
    let rp: Vec<T> = episodes.iter().map(|e| e.running_pairing).collect();
    Ok(MatchResult {
        payoff,
        per_state,
        decomposition_gap: (recombined - payoff.mean).abs(),
        terminal_pairing: MeanSe::from_samples(&tp),
        running_pairing: MeanSe::from_samples(&rp),
        transcripts: episodes.into_iter().filter_map(|e| e.transcript).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{load_builtin, FixtureParams};
    use crate::simplex::SimplexGrid;
    use crate::value::{solve_backward, TimeGrid};

    fn reveal(n: usize, m: usize) -> (GameSpec<f64>, ValueTable<f64>) {
        let spec = load_builtin::<f64>("reveal", &FixtureParams::default()).unwrap();
        let grid = SimplexGrid::new(2, m).unwrap();
        let table = solve_backward(&spec, TimeGrid::new(0.0, 1.0, n).unwrap(), &grid).unwrap();
        (spec, table)
    }

    #[test]
    fn controls_at_vertices_and_center() {
        let (spec, table) = reveal(10, 20);
        let inf = synthesize_informed(&table, &spec).unwrap();
        let g = table.grid();
        // ℓ₁ = u + v: minimise over u → −1; ℓ₂ = −u + 2v → +1
        assert_eq!(inf.control(0, g.vertex_id(0)).unwrap(), vec![-1.0]);
        assert_eq!(inf.control(0, g.vertex_id(1)).unwrap(), vec![1.0]);
        let game = spec.payoff_game().unwrap();
        assert_eq!(game.actions.v(argmax_v(game, 0.0, 0, &[1.0, 0.0]))[0], 1.0);
        assert_eq!(game.actions.v(argmax_v(game, 0.0, 0, &[0.5, 0.5]))[0], 1.0);
    }

    #[test]
    fn ex1_direct_control() {
        let spec = load_builtin::<f64>("ex1", &FixtureParams::default()).unwrap();
        let grid = SimplexGrid::new(2, 20).unwrap();
        let table = solve_backward(&spec, TimeGrid::new(0.0, 1.0, 10).unwrap(), &grid).unwrap();
        let inf = synthesize_informed(&table, &spec).unwrap();
        assert_eq!(
            inf.control(5, grid.id_of(&[5, 15]).unwrap()).unwrap(),
            vec![1.0]
        );
        assert_eq!(
            inf.control(5, grid.id_of(&[15, 5]).unwrap()).unwrap(),
            vec![-1.0]
        );
        let p0 = SimplexPoint::binary(0.5).unwrap();
        let err = play_match(
            &inf,
            UninformedStrategy::PosteriorBestResponse,
            &p0,
            10,
            1,
            0,
        )
        .unwrap_err();
        assert_eq!(err, Error::NotPayoffBased);
        let cex = load_builtin::<f64>("counterexample", &FixtureParams::default()).unwrap();
        let t2 = solve_backward(&cex, TimeGrid::new(0.0, 1.0, 10).unwrap(), &grid).unwrap();
        assert_eq!(
            synthesize_informed(&t2, &cex).unwrap_err(),
            Error::MissingSaddle
        );
    }

    #[test]
    fn reveal_matches() {
        let (spec, table) = reveal(50, 100);
        let inf = synthesize_informed(&table, &spec).unwrap();
        let p0 = SimplexPoint::binary(0.5).unwrap();
        let v = table.values(0)[table.grid().snap(&p0).unwrap().0];
        let best = play_match(
            &inf,
            UninformedStrategy::PosteriorBestResponse,
            &p0,
            20_000,
            5,
            3,
        )
        .unwrap();
        assert!(
            (best.payoff.mean - v).abs() <= 3.0 * best.payoff.se + 0.02,
            "{:?} vs {v}",
            best.payoff
        );
        assert!(best.decomposition_gap < 1e-12);
        assert_eq!(best.transcripts.len(), 3);
        for t in &best.transcripts {
            assert!((t.stage_payoffs.iter().sum::<f64>() - t.total).abs() < 1e-12);
            // the informed player reveals at the first knot
            assert_eq!(t.path.nodes[1], table.grid().vertex_id(t.state));
        }
        let diff = best.terminal_pairing.mean - best.running_pairing.mean;
        assert!(diff.abs() <= 3.0 * (best.terminal_pairing.se + best.running_pairing.se) + 1e-12);
        for s in [
            UninformedStrategy::Constant(0),
            UninformedStrategy::UniformRandom,
        ] {
            let r = play_match(&inf, s, &p0, 20_000, 5, 0).unwrap();
            assert!(r.payoff.mean <= v + 3.0 * r.payoff.se + 0.02, "{s:?}");
        }
        let c = play_match(&inf, UninformedStrategy::Clairvoyant, &p0, 20_000, 5, 0).unwrap();
        assert!(c.payoff.mean >= v - 3.0 * c.payoff.se);
    }

    #[test]
    fn match_is_deterministic() {
        let (spec, table) = reveal(10, 20);
        let inf = synthesize_informed(&table, &spec).unwrap();
        let p0 = SimplexPoint::binary(0.3).unwrap();
        let a = play_match(&inf, UninformedStrategy::UniformRandom, &p0, 3000, 8, 5).unwrap();
        let b = play_match(&inf, UninformedStrategy::UniformRandom, &p0, 3000, 8, 5).unwrap();
        assert_eq!(a, b);
    }
}
