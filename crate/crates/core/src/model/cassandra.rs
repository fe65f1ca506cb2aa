//! Reader and writer for Cassandra's `.POMDP` text format.
//!
//! Supported: `discount`, `values`, `states`/`actions`/`observations` (counts
//! or name lists), `start` (distribution, `uniform`, single state, `include`,
//! `exclude`), and `T:`/`O:`/`R:` entries in single-value, row, and matrix
//! form with `uniform`/`identity` keywords and `*` wildcards. Later entries
//! override earlier ones. Anything else is rejected.
//!
//! Rewards `R(s,u,s',z)` are reduced to expected costs
//! `g_u(s) = ±Σ_{s',z} P(s'|s,u) P(z|s',u) R(s,u,s',z)`, negated when the file
//! declares `values: reward`.

use std::fmt::Write as _;

use super::{Belief, Labels, PomdpModel, ROW_REPAIR_TOL};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
struct Token {
    text: String,
    line: usize,
}

fn tokenize(source: &str) -> Vec<Token> {
    let mut out = Vec::new();
    for (i, raw) in source.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("");
        for word in line.split_whitespace() {
            let mut rest = word;
            while let Some(pos) = rest.find(':') {
                if pos > 0 {
                    out.push(Token { text: rest[..pos].to_string(), line: i + 1 });
                }
                out.push(Token { text: ":".to_string(), line: i + 1 });
                rest = &rest[pos + 1..];
            }
            if !rest.is_empty() {
                out.push(Token { text: rest.to_string(), line: i + 1 });
            }
        }
    }
    out
}

const KEYWORDS: &[&str] = &[
    "discount",
    "values",
    "states",
    "actions",
    "observations",
    "start",
    "T",
    "O",
    "R",
    "E",
];

#[derive(Debug, Clone, Copy, PartialEq)]
enum Sign {
    Reward,
    Cost,
}

#[derive(Debug, Clone)]
enum Space {
    Count(usize),
    Names(Vec<String>),
}

impl Space {
    fn len(&self) -> usize {
        match self {
            Space::Count(n) => *n,
            Space::Names(v) => v.len(),
        }
    }

    fn names(&self) -> Option<Vec<String>> {
        match self {
            Space::Count(_) => None,
            Space::Names(v) => Some(v.clone()),
        }
    }
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    last_line: usize,
    discount: Option<f64>,
    sign: Sign,
    states: Option<Space>,
    actions: Option<Space>,
    observations: Option<Space>,
    start: Option<Vec<f64>>,
    transition: Vec<f64>,
    observation: Vec<f64>,
    reward: Vec<f64>,
}

impl Parser {
    fn err<T>(&self, msg: impl Into<String>) -> Result<T> {
        let line = self
            .tokens
            .get(self.pos)
            .map_or(self.last_line, |t| t.line);
        Err(Error::Parse { line, msg: msg.into() })
    }

    fn peek(&self) -> Option<&str> {
        self.tokens.get(self.pos).map(|t| t.text.as_str())
    }

    fn peek_at(&self, k: usize) -> Option<&str> {
        self.tokens.get(self.pos + k).map(|t| t.text.as_str())
    }

    fn next(&mut self) -> Result<String> {
        match self.tokens.get(self.pos) {
            Some(t) => {
                self.pos += 1;
                Ok(t.text.clone())
            }
            None => self.err("unexpected end of input"),
        }
    }

    fn expect(&mut self, what: &str) -> Result<()> {
        match self.peek() {
            Some(t) if t == what => {
                self.pos += 1;
                Ok(())
            }
            Some(t) => {
                let t = t.to_string();
                self.err(format!("expected '{what}', found '{t}'"))
            }
            None => self.err(format!("expected '{what}', found end of input")),
        }
    }

    fn number(&mut self) -> Result<f64> {
        let tok = self.next()?;
        match tok.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => {
                self.pos -= 1;
                self.err(format!("expected a number, found '{tok}'"))
            }
        }
    }

    fn numbers(&mut self, n: usize) -> Result<Vec<f64>> {
        (0..n).map(|_| self.number()).collect()
    }

    fn at_entry_start(&self) -> bool {
        match self.peek() {
            Some(t) if KEYWORDS.contains(&t) => {
                matches!(self.peek_at(1), Some(":"))
                    || (t == "start" && matches!(self.peek_at(1), Some("include" | "exclude")))
            }
            _ => false,
        }
    }

    fn space(&mut self) -> Result<Space> {
        let first = self.next()?;
        if let Ok(n) = first.parse::<usize>() {
            if n == 0 {
                self.pos -= 1;
                return self.err("count must be positive");
            }
            return Ok(Space::Count(n));
        }
        let mut names = vec![first];
        while self.peek().is_some() && !self.at_entry_start() {
            names.push(self.next()?);
        }
        Ok(Space::Names(names))
    }

    fn dims(&self) -> Result<(usize, usize, usize)> {
        match (&self.states, &self.actions, &self.observations) {
            (Some(s), Some(a), Some(o)) => Ok((s.len(), a.len(), o.len())),
            _ => self.err("states, actions and observations must be declared before entries"),
        }
    }

    fn resolve(&mut self, space: Space, what: &str) -> Result<Vec<usize>> {
        let tok = self.next()?;
        if tok == "*" {
            return Ok((0..space.len()).collect());
        }
        if let Ok(i) = tok.parse::<usize>() {
            if i < space.len() {
                return Ok(vec![i]);
            }
            self.pos -= 1;
            return self.err(format!("{what} index {i} out of range"));
        }
        if let Space::Names(names) = &space {
            if let Some(i) = names.iter().position(|n| *n == tok) {
                return Ok(vec![i]);
            }
        }
        self.pos -= 1;
        self.err(format!("unknown {what} '{tok}'"))
    }

    fn state_space(&self) -> Space {
        self.states.clone().expect("checked by dims")
    }

    fn action_space(&self) -> Space {
        self.actions.clone().expect("checked by dims")
    }

    fn obs_space(&self) -> Space {
        self.observations.clone().expect("checked by dims")
    }

    fn ensure_tables(&mut self) -> Result<()> {
        let (ns, na, no) = self.dims()?;
        if self.transition.is_empty() {
            self.transition = vec![0.0; na * ns * ns];
            self.observation = vec![0.0; na * ns * no];
            self.reward = vec![0.0; na * ns * ns * no];
        }
        Ok(())
    }

    fn parse_start(&mut self) -> Result<()> {
        let ns = match &self.states {
            Some(s) => s.len(),
            None => return self.err("'start' before 'states'"),
        };
        match self.next()?.as_str() {
            ":" => {}
            kind @ ("include" | "exclude") => {
                let include = kind == "include";
                self.expect(":")?;
                let mut mark = vec![!include; ns];
                while self.peek().is_some() && !self.at_entry_start() {
                    for s in self.resolve(self.state_space(), "state")? {
                        mark[s] = include;
                    }
                }
                let k = mark.iter().filter(|m| **m).count();
                if k == 0 {
                    return self.err("start set is empty");
                }
                self.start = Some(
                    mark.iter()
                        .map(|&m| if m { 1.0 / k as f64 } else { 0.0 })
                        .collect(),
                );
                return Ok(());
            }
            other => {
                let other = other.to_string();
                self.pos -= 1;
                return self.err(format!("unexpected '{other}' after 'start'"));
            }
        }
        if self.peek() == Some("uniform") {
            self.pos += 1;
            self.start = Some(vec![1.0 / ns as f64; ns]);
            return Ok(());
        }
        if ns == 1 {
            self.next()?;
            self.start = Some(vec![1.0]);
            return Ok(());
        }
        // A run of exactly |S| numbers is a distribution; a single token names a state.
        let run = (0..ns)
            .take_while(|&k| self.peek_at(k).is_some_and(|t| t.parse::<f64>().is_ok()))
            .count();
        if run == ns {
            self.start = Some(self.numbers(ns)?);
        } else {
            let s = self.resolve(self.state_space(), "state")?;
            let mut v = vec![0.0; ns];
            v[s[0]] = 1.0;
            self.start = Some(v);
        }
        Ok(())
    }

    fn parse_transition(&mut self) -> Result<()> {
        self.ensure_tables()?;
        let (ns, _, _) = self.dims()?;
        let actions = self.resolve(self.action_space(), "action")?;
        let idx = |u: usize, s: usize, t: usize| (u * ns + s) * ns + t;
        if self.peek() != Some(":") {
            // Full matrix, `uniform`, or `identity`.
            let m: Vec<f64> = match self.peek() {
                Some("uniform") => {
                    self.pos += 1;
                    vec![1.0 / ns as f64; ns * ns]
                }
                Some("identity") => {
                    self.pos += 1;
                    (0..ns * ns).map(|k| if k / ns == k % ns { 1.0 } else { 0.0 }).collect()
                }
                _ => self.numbers(ns * ns)?,
            };
            for &u in &actions {
                for s in 0..ns {
                    for t in 0..ns {
                        self.transition[idx(u, s, t)] = m[s * ns + t];
                    }
                }
            }
            return Ok(());
        }
        self.expect(":")?;
        let starts = self.resolve(self.state_space(), "state")?;
        if self.peek() != Some(":") {
            let row: Vec<f64> = if self.peek() == Some("uniform") {
                self.pos += 1;
                vec![1.0 / ns as f64; ns]
            } else {
                self.numbers(ns)?
            };
            for &u in &actions {
                for &s in &starts {
                    for t in 0..ns {
                        self.transition[idx(u, s, t)] = row[t];
                    }
                }
            }
            return Ok(());
        }
        self.expect(":")?;
        let ends = self.resolve(self.state_space(), "state")?;
        let p = self.number()?;
        for &u in &actions {
            for &s in &starts {
                for &t in &ends {
                    self.transition[idx(u, s, t)] = p;
                }
            }
        }
        Ok(())
    }

    fn parse_observation(&mut self) -> Result<()> {
        self.ensure_tables()?;
        let (ns, _, no) = self.dims()?;
        let actions = self.resolve(self.action_space(), "action")?;
        let idx = |u: usize, s: usize, z: usize| (u * ns + s) * no + z;
        if self.peek() != Some(":") {
            let m: Vec<f64> = if self.peek() == Some("uniform") {
                self.pos += 1;
                vec![1.0 / no as f64; ns * no]
            } else {
                self.numbers(ns * no)?
            };
            for &u in &actions {
                for s in 0..ns {
                    for z in 0..no {
                        self.observation[idx(u, s, z)] = m[s * no + z];
                    }
                }
            }
            return Ok(());
        }
        self.expect(":")?;
        let ends = self.resolve(self.state_space(), "state")?;
        if self.peek() != Some(":") {
            let row: Vec<f64> = if self.peek() == Some("uniform") {
                self.pos += 1;
                vec![1.0 / no as f64; no]
            } else {
                self.numbers(no)?
            };
            for &u in &actions {
                for &s in &ends {
                    for z in 0..no {
                        self.observation[idx(u, s, z)] = row[z];
                    }
                }
            }
            return Ok(());
        }
        self.expect(":")?;
        let obs = self.resolve(self.obs_space(), "observation")?;
        let p = self.number()?;
        for &u in &actions {
            for &s in &ends {
                for &z in &obs {
                    self.observation[idx(u, s, z)] = p;
                }
            }
        }
        Ok(())
    }

    fn parse_reward(&mut self) -> Result<()> {
        self.ensure_tables()?;
        let (ns, _, no) = self.dims()?;
        let idx = |u: usize, s: usize, t: usize, z: usize| ((u * ns + s) * ns + t) * no + z;
        let actions = self.resolve(self.action_space(), "action")?;
        self.expect(":")?;
        let starts = self.resolve(self.state_space(), "state")?;
        if self.peek() != Some(":") {
            let m = self.numbers(ns * no)?;
            for &u in &actions {
                for &s in &starts {
                    for t in 0..ns {
                        for z in 0..no {
                            self.reward[idx(u, s, t, z)] = m[t * no + z];
                        }
                    }
                }
            }
            return Ok(());
        }
        self.expect(":")?;
        let ends = self.resolve(self.state_space(), "state")?;
        if self.peek() != Some(":") {
            let row = self.numbers(no)?;
            for &u in &actions {
                for &s in &starts {
                    for &t in &ends {
                        for z in 0..no {
                            self.reward[idx(u, s, t, z)] = row[z];
                        }
                    }
                }
            }
            return Ok(());
        }
        self.expect(":")?;
        let obs = self.resolve(self.obs_space(), "observation")?;
        let r = self.number()?;
        for &u in &actions {
            for &s in &starts {
                for &t in &ends {
                    for &z in &obs {
                        self.reward[idx(u, s, t, z)] = r;
                    }
                }
            }
        }
        Ok(())
    }

    fn run(mut self) -> Result<PomdpModel> {
        while let Some(tok) = self.peek() {
            let tok = tok.to_string();
            match tok.as_str() {
                "discount" => {
                    self.pos += 1;
                    self.expect(":")?;
                    let d = self.number()?;
                    if !(0.0..=1.0).contains(&d) {
                        self.pos -= 1;
                        return self.err(format!("discount {d} not in [0,1]"));
                    }
                    self.discount = Some(d);
                }
                "values" => {
                    self.pos += 1;
                    self.expect(":")?;
                    self.sign = match self.next()?.as_str() {
                        "reward" => Sign::Reward,
                        "cost" => Sign::Cost,
                        other => {
                            let other = other.to_string();
                            self.pos -= 1;
                            return self.err(format!("unknown values kind '{other}'"));
                        }
                    };
                }
                "states" | "actions" | "observations" => {
                    self.pos += 1;
                    self.expect(":")?;
                    if !self.transition.is_empty() {
                        return self.err(format!("'{tok}' declared after table entries"));
                    }
                    let sp = self.space()?;
                    match tok.as_str() {
                        "states" => self.states = Some(sp),
                        "actions" => self.actions = Some(sp),
                        _ => self.observations = Some(sp),
                    }
                }
                "start" => {
                    self.pos += 1;
                    self.parse_start()?;
                }
                "T" | "O" | "R" => {
                    self.pos += 1;
                    self.expect(":")?;
                    match tok.as_str() {
                        "T" => self.parse_transition()?,
                        "O" => self.parse_observation()?,
                        _ => self.parse_reward()?,
                    }
                }
                other => return self.err(format!("unsupported or unexpected token '{other}'")),
            }
        }
        self.finish()
    }

    fn finish(self) -> Result<PomdpModel> {
        let (ns, na, no) = self.dims()?;
        let discount = match self.discount {
            Some(d) => d,
            None => return self.err("missing 'discount'"),
        };
        if self.transition.is_empty() {
            return self.err("no T: or O: entries");
        }
        let t = |u: usize, s: usize, x: usize| self.transition[(u * ns + s) * ns + x];
        let o = |u: usize, s: usize, z: usize| self.observation[(u * ns + s) * no + z];
        let transition: Vec<Vec<Vec<f64>>> = (0..na)
            .map(|u| (0..ns).map(|s| (0..ns).map(|x| t(u, s, x)).collect()).collect())
            .collect();
        let observation: Vec<Vec<Vec<f64>>> = (0..na)
            .map(|u| (0..ns).map(|s| (0..no).map(|z| o(u, s, z)).collect()).collect())
            .collect();
        let sign = match self.sign {
            Sign::Reward => -1.0,
            Sign::Cost => 1.0,
        };
        let mut cost = vec![vec![0.0; ns]; na];
        for u in 0..na {
            for s in 0..ns {
                let block = &self.reward[(u * ns + s) * ns * no..(u * ns + s + 1) * ns * no];
                let first = block[0];
                let r = if block.iter().all(|&r| r == first) {
                    first
                } else {
                    let mut acc = 0.0;
                    for x in 0..ns {
                        let p = t(u, s, x);
                        if p == 0.0 {
                            continue;
                        }
                        for z in 0..no {
                            acc += p * o(u, x, z) * block[x * no + z];
                        }
                    }
                    acc
                };
                cost[u][s] = if r == 0.0 { 0.0 } else { sign * r };
            }
        }
        let labels = Labels {
            states: self.states.as_ref().and_then(Space::names),
            actions: self.actions.as_ref().and_then(Space::names),
            observations: self.observations.as_ref().and_then(Space::names),
        };
        let mut model = PomdpModel::new(transition, observation, cost, discount)?.with_labels(labels)?;
        if let Some(start) = self.start {
            let sum: f64 = start.iter().sum();
            if start.iter().any(|p| *p < 0.0) || (sum - 1.0).abs() > ROW_REPAIR_TOL {
                return Err(Error::Validation(format!("start distribution sums to {sum}")));
            }
            let b = if (sum - 1.0).abs() > 1e-12 {
                Belief::renormalized(start)
            } else {
                Belief::new(start)?
            };
            model = model.with_start(b)?;
        }
        Ok(model)
    }
}

/// Parses a `.POMDP` document.
pub fn parse_pomdp(source: &str) -> Result<PomdpModel> {
    let tokens = tokenize(source);
    let last_line = tokens.last().map_or(1, |t| t.line);
    let parser = Parser {
        tokens,
        pos: 0,
        last_line,
        discount: None,
        sign: Sign::Reward,
        states: None,
        actions: None,
        observations: None,
        start: None,
        transition: Vec::new(),
        observation: Vec::new(),
        reward: Vec::new(),
    };
    parser.run()
}

pub fn read_pomdp_file(path: impl AsRef<std::path::Path>) -> Result<PomdpModel> {
    let text = std::fs::read_to_string(path)?;
    parse_pomdp(&text)
}

fn push_row(out: &mut String, row: &[f64]) {
    let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
    out.push_str(&cells.join(" "));
    out.push('\n');
}

fn space_decl(names: &Option<Vec<String>>, n: usize) -> String {
    match names {
        Some(v) => v.join(" "),
        None => n.to_string(),
    }
}

/// Writes the model back in `.POMDP` syntax using `values: cost`.
///
/// Parsing the output reproduces the model bit for bit.
pub fn write_pomdp(model: &PomdpModel) -> String {
    let mut out = String::new();
    let labels = model.labels();
    let _ = writeln!(out, "discount: {:?}", model.discount());
    out.push_str("values: cost\n");
    let _ = writeln!(out, "states: {}", space_decl(&labels.states, model.num_states()));
    let _ = writeln!(out, "actions: {}", space_decl(&labels.actions, model.num_actions()));
    let _ = writeln!(
        out,
        "observations: {}",
        space_decl(&labels.observations, model.num_observations())
    );
    if let Some(start) = model.start_belief() {
        out.push_str("start: ");
        push_row(&mut out, start);
    }
    out.push('\n');
    for u in 0..model.num_actions() {
        let _ = writeln!(out, "T: {u}");
        for s in 0..model.num_states() {
            push_row(&mut out, model.transition_row(u, s));
        }
        out.push('\n');
    }
    for u in 0..model.num_actions() {
        let _ = writeln!(out, "O: {u}");
        for s in 0..model.num_states() {
            push_row(&mut out, model.observation_row(u, s));
        }
        out.push('\n');
    }
    for u in 0..model.num_actions() {
        for s in 0..model.num_states() {
            let _ = writeln!(out, "R: {u} : {s} : * : * {:?}", model.cost(u, s));
        }
    }
    out
}
