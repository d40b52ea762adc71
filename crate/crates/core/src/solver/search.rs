//! Depth-first branch and bound over instance counts, wiring and hosts.
//!
//! Sources of each app are placed as a host multiset. Every higher level is
//! built by walking the previous level's instances in order; each one joins
//! an already opened instance of the next type or opens a new one on some
//! host (restricted growth, so every partition is produced once). The last
//! type of each app then routes to the CN.

use std::time::{Duration, Instant};

use crate::cluster::{ClusterGraph, RESOURCE_COUNT};
use crate::mobility::ClusterMobility;
use crate::placement_eval::{node_term, pair_penalty, EvalConfig};
use crate::routing::RouteTable;
use crate::service_model::TypeGraph;

const UNREACHABLE: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Goal {
    /// hops first, then cost
    Lexicographic,
    /// `w * hops + cost`
    Weighted(f64),
    /// feasible plan with the most hops
    MaxHops,
}

type Key = (f64, f64);

fn at_least(a: Key, b: Key) -> bool {
    a.0 > b.0 || (a.0 == b.0 && a.1 >= b.1)
}

struct LevelSpec {
    demand: [f64; RESOURCE_COUNT],
    alpha: f64,
    rate: f64,
    min_needed: usize,
    max: usize,
    /// weighted node cost per host
    node_cost: Vec<f64>,
    min_node_cost: f64,
    fits_alone: Vec<bool>,
}

struct AppSpec {
    levels: Vec<LevelSpec>,
    source_rate: f64,
    k: usize,
    /// product of alphas of the types after level `p` (index `p-1`)
    tail_alpha: Vec<f64>,
}

pub(crate) struct Problem<'a> {
    cluster: &'a ClusterGraph,
    table: RouteTable,
    apps: Vec<AppSpec>,
    n: usize,
    cn: usize,
    dist: Vec<Vec<u32>>,
    max_dist: u32,
    /// weighted link cost per unit of flow along the fixed route
    route_lc: Vec<Vec<f64>>,
    route_pen: Vec<Vec<f64>>,
    min_out_lc: Vec<f64>,
    min_out_pen: Vec<f64>,
    min_source_dist: Vec<u32>,
}

impl<'a> Problem<'a> {
    pub(crate) fn new(
        cluster: &'a ClusterGraph,
        mobility: &ClusterMobility,
        templates: &[TypeGraph],
        eval: &EvalConfig,
    ) -> Self {
        let n = cluster.len();
        let cn = cluster.cn();
        let table = RouteTable::new(cluster, mobility);
        let hops = cluster.hop_counts();
        let dist: Vec<Vec<u32>> = (0..n)
            .map(|a| (0..n).map(|b| hops.get(a, b).unwrap_or(UNREACHABLE)).collect())
            .collect();
        let max_dist = dist
            .iter()
            .flatten()
            .filter(|&&d| d != UNREACHABLE)
            .copied()
            .max()
            .unwrap_or(0);
        let pen_on = eval.penalty_lambda > 0.0;
        let hop_lc = |u: usize, v: usize| {
            eval.lambda1 * (1.0 - mobility.joint(u, v)) / cluster.bandwidth(u, v)
        };
        let hop_pen = |u: usize, v: usize| {
            if pen_on {
                pair_penalty(mobility.joint(u, v), eval)
            } else {
                0.0
            }
        };
        let mut route_lc = vec![vec![f64::INFINITY; n]; n];
        let mut route_pen = vec![vec![f64::INFINITY; n]; n];
        for a in 0..n {
            for b in 0..n {
                if let Some(p) = table.path(a, b) {
                    route_lc[a][b] = p.windows(2).map(|w| hop_lc(w[0], w[1])).sum();
                    route_pen[a][b] = p.windows(2).map(|w| hop_pen(w[0], w[1])).sum();
                }
            }
        }
        let min_out = |f: &dyn Fn(usize, usize) -> f64, u: usize| {
            cluster
                .out_neighbors(u)
                .iter()
                .map(|&v| f(u, v))
                .fold(f64::INFINITY, f64::min)
        };
        let min_out_lc = (0..n).map(|u| min_out(&hop_lc, u)).collect();
        let min_out_pen = (0..n).map(|u| min_out(&hop_pen, u)).collect();

        let apps: Vec<AppSpec> = templates
            .iter()
            .map(|tg| {
                let levels: Vec<LevelSpec> = tg
                    .chain
                    .iter()
                    .map(|t| {
                        let demand = t.demand.to_array();
                        let fits_alone: Vec<bool> = (0..n)
                            .map(|h| {
                                let c = cluster.capacity(h).to_array();
                                (0..RESOURCE_COUNT).all(|k| demand[k] <= c[k])
                            })
                            .collect();
                        let node_cost: Vec<f64> = (0..n)
                            .map(|h| {
                                eval.lambda2
                                    * node_term(&t.demand, cluster.capacity(h), mobility.ccp(h))
                            })
                            .collect();
                        let min_node_cost = (0..n)
                            .filter(|&h| fits_alone[h])
                            .map(|h| node_cost[h])
                            .fold(f64::INFINITY, f64::min);
                        let (lo, hi) = t.instance_bounds;
                        let min_needed = if t.p == 1 {
                            lo
                        } else {
                            let need = (tg.level_inflow(t.p) / t.processing_rate - 1e-9).ceil();
                            lo.max(need.max(0.0) as usize)
                        };
                        LevelSpec {
                            demand,
                            alpha: if t.p == 1 { 1.0 } else { t.alpha },
                            rate: t.processing_rate,
                            min_needed,
                            max: hi,
                            node_cost,
                            min_node_cost,
                            fits_alone,
                        }
                    })
                    .collect();
                let tail_alpha = (0..levels.len())
                    .map(|i| levels[i + 1..].iter().map(|l| l.alpha).product())
                    .collect();
                AppSpec {
                    k: tg.type1_count(),
                    source_rate: tg.source_rate,
                    levels,
                    tail_alpha,
                }
            })
            .collect();
        let min_source_dist = apps
            .iter()
            .map(|a| {
                (0..n)
                    .filter(|&h| a.levels[0].fits_alone[h])
                    .map(|h| dist[h][cn])
                    .min()
                    .unwrap_or(UNREACHABLE)
            })
            .collect();
        Self {
            cluster,
            table,
            apps,
            n,
            cn,
            dist,
            max_dist,
            route_lc,
            route_pen,
            min_out_lc,
            min_out_pen,
            min_source_dist,
        }
    }

    pub(crate) fn route_table(&self) -> &RouteTable {
        &self.table
    }
}

#[derive(Debug, Clone, Copy)]
enum Stage {
    Sources(usize),
    Level(usize, usize),
    Sink(usize),
}

#[derive(Debug, Clone, Default)]
pub(crate) struct LevelState {
    pub hosts: Vec<usize>,
    pub inflow: Vec<f64>,
    /// group index chosen by each instance of the previous level
    pub wiring: Vec<usize>,
}

pub(crate) struct Limits {
    pub time: Option<Duration>,
    pub nodes: Option<u64>,
}

pub(crate) struct Outcome {
    /// per app, per level
    pub best: Option<Vec<Vec<LevelState>>>,
    pub nodes: u64,
    pub aborted: bool,
}

struct Engine<'p, 'a> {
    pb: &'p Problem<'a>,
    goal: Goal,
    stages: Vec<Stage>,
    used: Vec<[f64; RESOURCE_COUNT]>,
    link: Vec<Vec<f64>>,
    hops: u32,
    cost: f64,
    levels: Vec<Vec<LevelState>>,
    /// completed levels per app
    done: Vec<usize>,
    sunk: Vec<bool>,
    best: Option<(Key, u32, f64, Vec<Vec<LevelState>>)>,
    nodes: u64,
    start: Instant,
    limits: Limits,
    aborted: bool,
    seen_hosts: Vec<f64>,
}

pub(crate) fn search(pb: &Problem<'_>, goal: Goal, limits: Limits) -> Outcome {
    let mut stages: Vec<Stage> = (0..pb.apps.len()).map(Stage::Sources).collect();
    let deepest = pb.apps.iter().map(|a| a.levels.len()).max().unwrap_or(0);
    for p in 2..=deepest {
        for (a, app) in pb.apps.iter().enumerate() {
            if app.levels.len() >= p {
                stages.push(Stage::Level(a, p));
            }
        }
    }
    stages.extend((0..pb.apps.len()).map(Stage::Sink));

    let mut e = Engine {
        pb,
        goal,
        stages,
        used: vec![[0.0; RESOURCE_COUNT]; pb.n],
        link: vec![vec![0.0; pb.n]; pb.n],
        hops: 0,
        cost: 0.0,
        levels: pb.apps.iter().map(|a| vec![LevelState::default(); a.levels.len()]).collect(),
        done: vec![0; pb.apps.len()],
        sunk: vec![false; pb.apps.len()],
        best: None,
        nodes: 0,
        start: Instant::now(),
        limits,
        aborted: false,
        seen_hosts: vec![f64::INFINITY; pb.n],
    };
    let feasible_counts = pb.apps.iter().all(|a| {
        a.levels.iter().all(|l| l.min_needed <= l.max) && a.levels[0].max == a.k
    });
    if feasible_counts {
        e.run(0);
    }
    Outcome {
        best: e.best.map(|b| b.3),
        nodes: e.nodes,
        aborted: e.aborted,
    }
}

impl Engine<'_, '_> {
    fn key(&self, hops: f64, cost: f64) -> Key {
        match self.goal {
            Goal::Lexicographic => (hops, cost),
            Goal::Weighted(w) => (w * hops + cost, 0.0),
            Goal::MaxHops => (-hops, 0.0),
        }
    }

    fn stop(&mut self) -> bool {
        if self.aborted {
            return true;
        }
        self.nodes += 1;
        if let Some(max) = self.limits.nodes {
            if self.nodes > max {
                self.aborted = true;
            }
        }
        if self.nodes % 2048 == 0 {
            if let Some(t) = self.limits.time {
                if self.start.elapsed() > t {
                    self.aborted = true;
                }
            }
        }
        self.aborted
    }

    fn pruned(&mut self) -> bool {
        if self.stop() {
            return true;
        }
        let Some(best) = &self.best else {
            return false;
        };
        let best_key = best.0;
        let bound = if self.goal == Goal::MaxHops {
            self.key(self.hops as f64 + self.hop_upper() as f64, 0.0)
        } else {
            let (h, c) = self.lower_bound();
            self.key(self.hops as f64 + h as f64, self.cost + c)
        };
        at_least(bound, best_key)
    }

    /// Remaining hop and cost lower bounds over all apps.
    fn lower_bound(&mut self) -> (u32, f64) {
        let pb = self.pb;
        let mut hop_lb = 0;
        let mut cost_lb = 0.0;
        let mut seen = std::mem::take(&mut self.seen_hosts);
        for a in 0..pb.apps.len() {
            if self.sunk[a] {
                continue;
            }
            let app = &pb.apps[a];
            let depth = app.levels.len();
            let done = self.done[a];
            // reduced flow that must still leave each host
            seen.iter_mut().for_each(|x| *x = f64::INFINITY);
            let mut far = 0;
            let mut extra_source_hops = 0;
            let mut note = |seen: &mut [f64], h: usize, flow: f64| {
                if flow < seen[h] {
                    seen[h] = flow;
                }
                far = far.max(pb.dist[h][pb.cn]);
            };
            if done == 0 {
                let placed = &self.levels[a][0].hosts;
                for &h in placed {
                    note(&mut seen, h, app.source_rate * app.tail_alpha[0]);
                }
                if placed.len() < app.k {
                    extra_source_hops = pb.min_source_dist[a];
                }
            } else if done == depth {
                let lvl = &self.levels[a][depth - 1];
                for (i, &h) in lvl.hosts.iter().enumerate() {
                    note(&mut seen, h, self.outflow(a, depth, i));
                }
            } else {
                // level done+1 is in progress
                let p = done + 1;
                let prev = &self.levels[a][p - 2];
                let cur = &self.levels[a][p - 1];
                let tail_prev = app.tail_alpha[p - 2];
                for i in cur.wiring.len()..prev.hosts.len() {
                    let f = self.outflow(a, p - 1, i) * tail_prev;
                    note(&mut seen, prev.hosts[i], f);
                }
                let spec = &app.levels[p - 1];
                for (g, &h) in cur.hosts.iter().enumerate() {
                    note(&mut seen, h, cur.inflow[g] * spec.alpha * app.tail_alpha[p - 1]);
                }
                let short = spec.min_needed.saturating_sub(cur.hosts.len());
                cost_lb += short as f64 * spec.min_node_cost;
            }
            let first_open = if done == 0 { 2 } else { done + 2 };
            for q in first_open..=depth {
                let spec = &app.levels[q - 1];
                cost_lb += spec.min_needed as f64 * spec.min_node_cost;
            }
            let mut distinct = 0;
            for h in 0..pb.n {
                let f = seen[h];
                if f.is_finite() && h != pb.cn {
                    distinct += 1;
                    let step = f * pb.min_out_lc[h] + pb.min_out_pen[h];
                    if step.is_finite() {
                        cost_lb += step;
                    }
                }
            }
            hop_lb += distinct.max(far).max(extra_source_hops);
        }
        self.seen_hosts = seen;
        (hop_lb, cost_lb)
    }

    /// Upper bound on hops still to be added.
    fn hop_upper(&self) -> u32 {
        let pb = self.pb;
        let mut total = 0u32;
        for a in 0..pb.apps.len() {
            if self.sunk[a] {
                continue;
            }
            let app = &pb.apps[a];
            let depth = app.levels.len() as u32;
            let done = self.done[a];
            let routes = if done == 0 {
                app.k as u32 * depth
            } else if done == app.levels.len() {
                self.levels[a][done - 1].hosts.len() as u32
            } else {
                let p = done + 1;
                let prev = self.levels[a][p - 2].hosts.len() as u32;
                let cur = &self.levels[a][p - 1];
                let open = prev - cur.wiring.len() as u32;
                let after = depth + 1 - p as u32;
                open + (cur.hosts.len() as u32 + open) * after
            };
            total += routes * pb.max_dist;
        }
        total
    }

    fn outflow(&self, a: usize, p: usize, i: usize) -> f64 {
        let app = &self.pb.apps[a];
        if p == 1 {
            app.source_rate
        } else {
            app.levels[p - 1].alpha * self.levels[a][p - 1].inflow[i]
        }
    }

    fn fits(&self, a: usize, p: usize, h: usize) -> bool {
        let spec = &self.pb.apps[a].levels[p - 1];
        if !spec.fits_alone[h] {
            return false;
        }
        let cap = self.pb.cluster.capacity(h).to_array();
        (0..RESOURCE_COUNT).all(|k| self.used[h][k] + spec.demand[k] <= cap[k])
    }

    fn occupy(&mut self, a: usize, p: usize, h: usize) -> [f64; RESOURCE_COUNT] {
        let spec = &self.pb.apps[a].levels[p - 1];
        let old = self.used[h];
        for k in 0..RESOURCE_COUNT {
            self.used[h][k] += spec.demand[k];
        }
        self.cost += spec.node_cost[h];
        old
    }

    /// Adds a routed flow; on a bandwidth overflow nothing changes.
    fn add_route(&mut self, from: usize, to: usize, flow: f64) -> Option<Vec<f64>> {
        let pb = self.pb;
        if pb.dist[from][to] == UNREACHABLE {
            return None;
        }
        let path = pb.table.path(from, to)?;
        for w in path.windows(2) {
            if self.link[w[0]][w[1]] + flow > pb.cluster.bandwidth(w[0], w[1]) {
                return None;
            }
        }
        let mut old = Vec::with_capacity(path.len());
        for w in path.windows(2) {
            old.push(self.link[w[0]][w[1]]);
            self.link[w[0]][w[1]] += flow;
        }
        self.hops += pb.dist[from][to];
        self.cost += flow * pb.route_lc[from][to] + pb.route_pen[from][to];
        Some(old)
    }

    fn undo_route(&mut self, from: usize, to: usize, old: Vec<f64>) {
        let path = self.pb.table.path(from, to).unwrap();
        for (w, o) in path.windows(2).zip(old) {
            self.link[w[0]][w[1]] = o;
        }
        self.hops -= self.pb.dist[from][to];
    }

    fn run(&mut self, s: usize) {
        if s == self.stages.len() {
            self.complete();
            return;
        }
        match self.stages[s] {
            Stage::Sources(a) => self.place_source(s, a, 0),
            Stage::Level(a, p) => self.assign(s, a, p, 0),
            Stage::Sink(a) => self.sink(s, a),
        }
    }

    fn complete(&mut self) {
        let key = self.key(self.hops as f64, self.cost);
        let better = match &self.best {
            None => true,
            Some(b) => !at_least(key, b.0),
        };
        if better {
            self.best = Some((key, self.hops, self.cost, self.levels.clone()));
        }
    }

    fn place_source(&mut self, s: usize, a: usize, min_host: usize) {
        if self.pruned() {
            return;
        }
        if self.levels[a][0].hosts.len() == self.pb.apps[a].k {
            self.done[a] = 1;
            self.run(s + 1);
            self.done[a] = 0;
            return;
        }
        for h in min_host..self.pb.n {
            if !self.fits(a, 1, h) {
                continue;
            }
            let cost = self.cost;
            let old = self.occupy(a, 1, h);
            self.levels[a][0].hosts.push(h);
            self.place_source(s, a, h);
            self.levels[a][0].hosts.pop();
            self.used[h] = old;
            self.cost = cost;
            if self.aborted {
                return;
            }
        }
    }

    fn assign(&mut self, s: usize, a: usize, p: usize, e: usize) {
        if self.pruned() {
            return;
        }
        let spec = &self.pb.apps[a].levels[p - 1];
        let (min_needed, max, rate) = (spec.min_needed, spec.max, spec.rate);
        let f = self.levels[a][p - 2].hosts.len();
        let opened = self.levels[a][p - 1].hosts.len();
        if opened + (f - e) < min_needed {
            return;
        }
        if e == f {
            self.done[a] = p;
            self.run(s + 1);
            self.done[a] = p - 1;
            return;
        }
        let from = self.levels[a][p - 2].hosts[e];
        let flow = self.outflow(a, p - 1, e);

        for g in 0..opened {
            let inflow = self.levels[a][p - 1].inflow[g];
            if inflow + flow > rate {
                continue;
            }
            let to = self.levels[a][p - 1].hosts[g];
            let cost = self.cost;
            if let Some(old) = self.add_route(from, to, flow) {
                let lvl = &mut self.levels[a][p - 1];
                lvl.inflow[g] = inflow + flow;
                lvl.wiring.push(g);
                self.assign(s, a, p, e + 1);
                let lvl = &mut self.levels[a][p - 1];
                lvl.wiring.pop();
                lvl.inflow[g] = inflow;
                self.undo_route(from, to, old);
                self.cost = cost;
                if self.aborted {
                    return;
                }
            }
        }
        if opened >= max || flow > rate {
            return;
        }
        for h in 0..self.pb.n {
            if !self.fits(a, p, h) {
                continue;
            }
            let cost = self.cost;
            let used = self.occupy(a, p, h);
            if let Some(old) = self.add_route(from, h, flow) {
                let lvl = &mut self.levels[a][p - 1];
                lvl.hosts.push(h);
                lvl.inflow.push(flow);
                lvl.wiring.push(opened);
                self.assign(s, a, p, e + 1);
                let lvl = &mut self.levels[a][p - 1];
                lvl.wiring.pop();
                lvl.inflow.pop();
                lvl.hosts.pop();
                self.undo_route(from, h, old);
            }
            self.used[h] = used;
            self.cost = cost;
            if self.aborted {
                return;
            }
        }
    }

    fn sink(&mut self, s: usize, a: usize) {
        if self.pruned() {
            return;
        }
        let depth = self.pb.apps[a].levels.len();
        let cn = self.pb.cn;
        let cost = self.cost;
        let count = self.levels[a][depth - 1].hosts.len();
        let mut undo = Vec::with_capacity(count);
        let mut ok = true;
        for i in 0..count {
            let h = self.levels[a][depth - 1].hosts[i];
            let flow = self.outflow(a, depth, i);
            match self.add_route(h, cn, flow) {
                Some(old) => undo.push((h, old)),
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            self.sunk[a] = true;
            self.run(s + 1);
            self.sunk[a] = false;
        }
        for (h, old) in undo.into_iter().rev() {
            self.undo_route(h, cn, old);
        }
        self.cost = cost;
    }
}
