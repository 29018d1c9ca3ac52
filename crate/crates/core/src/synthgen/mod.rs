//! Seeded generator of restaurant-reservation corpora in five task shapes,
//! with out-of-vocabulary and extra-slot test variants.

pub mod templates;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::corpus::{ContextTurn, Dialog, EvalRecord, KbFact, TaskId, Turn};
use crate::error::{Error, Result};
use crate::kb::{query, EntityType, KbRecord, KnowledgeBase};
use crate::text::{self, SILENCE};
use templates::Inventory;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Variant {
    Base,
    OovKb,
    ExtraEntity,
    OovAndExtra,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::Base,
        Variant::OovKb,
        Variant::ExtraEntity,
        Variant::OovAndExtra,
    ];

    pub fn is_oov(self) -> bool {
        matches!(self, Variant::OovKb | Variant::OovAndExtra)
    }

    pub fn has_extra(self) -> bool {
        matches!(self, Variant::ExtraEntity | Variant::OovAndExtra)
    }

    pub fn inventory(self) -> &'static Inventory {
        if self.is_oov() {
            &templates::OOV
        } else {
            &templates::BASE
        }
    }

    /// Slot types every dialog of this variant fills.
    pub fn entity_types(self) -> Vec<EntityType> {
        let mut types = EntityType::base();
        if self.has_extra() {
            types.push(EntityType::new("dietary_restriction"));
        }
        types
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Base => "base",
            Variant::OovKb => "oov_kb",
            Variant::ExtraEntity => "extra_entity",
            Variant::OovAndExtra => "oov_and_extra",
        })
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Variant::ALL
            .into_iter()
            .find(|v| v.to_string() == s)
            .ok_or_else(|| format!("unknown variant {s:?} (expected base, oov_kb, extra_entity, oov_and_extra)"))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GenConfig {
    pub seed: u64,
    pub tasks: Vec<TaskId>,
    /// Training dialogs per task.
    pub n_dialogs: usize,
    /// Test dialogs per task.
    pub test_dialogs: usize,
    /// Number of restaurants.
    pub kb_size: usize,
    /// Candidates per evaluation record, gold included.
    pub pool_size: usize,
    pub variant: Variant,
    pub dubious_rate: f64,
    pub multi_rate: f64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            seed: 42,
            tasks: TaskId::ALL.to_vec(),
            n_dialogs: 2000,
            test_dialogs: 500,
            kb_size: 50,
            pool_size: 10,
            variant: Variant::Base,
            dubious_rate: 0.15,
            multi_rate: 0.15,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        if self.pool_size < 2 {
            return Err(Error::Generation(format!("pool size {} < 2", self.pool_size)));
        }
        if self.tasks.is_empty() {
            return Err(Error::Generation("no tasks requested".into()));
        }
        for rate in [self.dubious_rate, self.multi_rate] {
            if !(0.0..=1.0).contains(&rate) {
                return Err(Error::Generation(format!("rate {rate} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    fn code(self) -> u64 {
        match self {
            Split::Train => 1,
            Split::Test => 2,
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Independent stream for one unit of work, derived from the seed.
fn sub_rng(seed: u64, path: &[u64]) -> ChaCha8Rng {
    let s = path.iter().fold(splitmix(seed), |acc, p| splitmix(acc ^ splitmix(*p)));
    ChaCha8Rng::seed_from_u64(s)
}

type Goal = BTreeMap<EntityType, String>;

fn pick<'a, T: ?Sized>(rng: &mut ChaCha8Rng, items: &'a [&'a T]) -> &'a T {
    items[rng.gen_range(0..items.len())]
}

fn fill(template: &str, pairs: &[(&str, &str)]) -> String {
    let mut s = template.to_string();
    for (k, v) in pairs {
        s = s.replace(k, v);
    }
    s
}

fn other_value(rng: &mut ChaCha8Rng, values: &[&str], not: &str) -> String {
    let others: Vec<&str> = values.iter().copied().filter(|v| *v != not).collect();
    pick(rng, &others).to_string()
}

/// The generated knowledge base and dialogs of one variant.
pub struct Generated {
    pub config: GenConfig,
    pub kb: KnowledgeBase,
    pub train: Vec<Dialog>,
    pub test: Vec<Dialog>,
    pool: Vec<String>,
}

/// Restaurants come in groups sharing every slot value, so each group's
/// values form a goal with at least three matching restaurants.
fn build_kb(config: &GenConfig, rng: &mut ChaCha8Rng) -> Result<(KnowledgeBase, Vec<Goal>)> {
    let inv = config.variant.inventory();
    let types = config.variant.entity_types();
    let n_groups = config.kb_size / 3;
    let widest = types.iter().map(|t| inv.values(t.name()).len()).max().unwrap_or(0);
    if n_groups == 0 || n_groups < widest {
        return Err(Error::Generation(format!(
            "kb_size {} is too small: need at least {} restaurants for three matches per slot combination",
            config.kb_size,
            3 * widest.max(1)
        )));
    }
    let orders: Vec<Vec<&str>> = types
        .iter()
        .map(|t| {
            let mut v = inv.values(t.name()).to_vec();
            v.shuffle(rng);
            v
        })
        .collect();
    let mut goals: Vec<Goal> = Vec::new();
    let mut seen = BTreeSet::new();
    for g in 0..n_groups {
        let mut attempt = 0;
        let goal = loop {
            let goal: Goal = types
                .iter()
                .zip(&orders)
                .map(|(t, vals)| {
                    let v = if g < vals.len() && attempt == 0 {
                        vals[g]
                    } else {
                        vals[rng.gen_range(0..vals.len())]
                    };
                    (t.clone(), v.to_string())
                })
                .collect();
            if seen.insert(goal.clone()) {
                break goal;
            }
            attempt += 1;
            if attempt > 1000 {
                return Err(Error::Generation("could not find distinct slot combinations".into()));
            }
        };
        goals.push(goal);
    }

    let mut records = Vec::new();
    let mut names = BTreeSet::new();
    let extra = config.kb_size % 3;
    for (g, goal) in goals.iter().enumerate() {
        let size = 3 + usize::from(g < extra);
        let mut ratings: Vec<u32> = (1..=8).collect();
        ratings.shuffle(rng);
        for &rating in &ratings[..size] {
            let base = format!(
                "resto_{}_{}_{}_{}stars",
                goal[&EntityType::new("location")],
                goal[&EntityType::new("price_range")],
                goal[&EntityType::new("cuisine_type")],
                rating
            )
            .replace(' ', "_");
            let mut name = base.clone();
            let mut k = 1;
            while !names.insert(name.clone()) {
                k += 1;
                name = format!("{base}_{k}");
            }
            let mut record = KbRecord::new(&name);
            for (t, v) in goal {
                record.properties.insert(t.property(), v.clone());
            }
            record.properties.insert("R_rating".into(), rating.to_string());
            record.properties.insert("R_address".into(), format!("{name}_address"));
            record.properties.insert("R_phone".into(), format!("{name}_phone"));
            records.push(record);
        }
    }
    Ok((KnowledgeBase::from_records(records)?, goals))
}

struct Builder<'a> {
    config: &'a GenConfig,
    rng: ChaCha8Rng,
    dialog: Dialog,
}

impl<'a> Builder<'a> {
    fn ex(&mut self, user: impl Into<String>, system: impl Into<String>) {
        self.dialog.push_exchange(user, system);
    }

    fn values(&self, ty: &EntityType) -> &'static [&'static str] {
        self.config.variant.inventory().values(ty.name())
    }

    fn random_goal(&mut self) -> Goal {
        self.config
            .variant
            .entity_types()
            .into_iter()
            .map(|t| {
                let vals = self.values(&t);
                let v = vals[self.rng.gen_range(0..vals.len())].to_string();
                (t, v)
            })
            .collect()
    }

    /// Goals before each revision, ending with `last`.
    fn revision_chain(&mut self, last: Goal, rounds: usize) -> Vec<Goal> {
        let mut chain = vec![last];
        for _ in 0..rounds {
            let mut prev = chain[0].clone();
            let types: Vec<EntityType> = prev.keys().cloned().collect();
            let t = types[self.rng.gen_range(0..types.len())].clone();
            let vals = self.values(&t);
            let v = other_value(&mut self.rng, vals, &prev[&t]);
            prev.insert(t, v);
            chain.insert(0, prev);
        }
        chain
    }

    fn api_call(goal: &Goal) -> String {
        let mut s = String::from("api_call");
        for v in goal.values() {
            s.push(' ');
            s.push_str(v);
        }
        s
    }

    /// Greeting through the first api_call. `full` requests every slot up front.
    fn slot_filling(&mut self, goal: &Goal, full: bool) {
        let greeting = pick(&mut self.rng, templates::GREETINGS);
        self.ex(greeting, templates::GREETING_REPLY);

        let extra = EntityType::new("dietary_restriction");
        let mut requested: Vec<EntityType> = if full {
            goal.keys().cloned().collect()
        } else {
            let mut base: Vec<EntityType> = goal.keys().filter(|t| **t != extra).cloned().collect();
            base.shuffle(&mut self.rng);
            base.truncate(self.rng.gen_range(1..=3));
            if goal.contains_key(&extra) && self.rng.gen_bool(0.5) {
                base.push(extra.clone());
            }
            base
        };
        requested.shuffle(&mut self.rng);
        let mut request = pick(&mut self.rng, templates::REQUEST_OPENERS).to_string();
        for t in &requested {
            let clause = pick(&mut self.rng, templates::request_clauses(t.name()));
            request.push_str(&fill(clause, &[("{v}", &goal[t])]));
        }
        self.ex(request, templates::ON_IT);

        let missing: Vec<EntityType> = goal.keys().filter(|t| !requested.contains(t)).cloned().collect();
        let mut user = SILENCE.to_string();
        for t in &missing {
            let value = goal[t].clone();
            self.ex(std::mem::take(&mut user), templates::question(t.name()));
            if self.rng.gen_bool(self.config.dubious_rate) {
                let vals = self.values(t);
                let a = other_value(&mut self.rng, vals, &value);
                let b = other_value(&mut self.rng, vals, &a);
                let hedge = pick(&mut self.rng, templates::HEDGES);
                self.ex(fill(hedge, &[("{a}", &a), ("{b}", &b)]), templates::WHENEVER_READY);
            }
            user = if self.rng.gen_bool(self.config.multi_rate) {
                let mut options: Vec<(&str, usize)> = templates::MULTI_GENERIC.to_vec();
                options.extend(templates::multi(t.name()));
                let (template, meant) = options[self.rng.gen_range(0..options.len())];
                let vals = self.values(t);
                let other = other_value(&mut self.rng, vals, &value);
                let (a, b) = if meant == 1 { (value, other) } else { (other, value) };
                fill(template, &[("{a}", &a), ("{b}", &b)])
            } else {
                fill(pick(&mut self.rng, templates::answers(t.name())), &[("{v}", &value)])
            };
        }
        self.ex(user, templates::LOOKING);
        self.ex(SILENCE, Self::api_call(goal));
    }

    /// Revision rounds after an api_call, one slot changed per round.
    fn revisions(&mut self, chain: &[Goal]) {
        for w in chain.windows(2) {
            let (t, v) = w[1].iter().find(|(t, v)| w[0][*t] != **v).expect("goals differ");
            let template = pick(&mut self.rng, templates::revisions(t.name()));
            self.ex(fill(template, &[("{v}", v)]), templates::UPDATE_REPLY);
            let no = pick(&mut self.rng, templates::NO_MORE);
            self.ex(no, templates::LOOKING);
            self.ex(SILENCE, Self::api_call(&w[1]));
        }
    }

    /// Result lines, then proposals by rating until one is accepted.
    /// Returns the accepted restaurant.
    fn options(&mut self, kb: &KnowledgeBase, goal: &Goal, max_rejections: usize) -> Result<KbRecord> {
        let mut results = query(kb, goal);
        if results.len() < 3 {
            return Err(Error::Generation(format!(
                "goal {goal:?} has only {} matches",
                results.len()
            )));
        }
        let mut shuffled = results.clone();
        shuffled.shuffle(&mut self.rng);
        for r in &shuffled {
            for (property, value) in &r.properties {
                if property == "R_dietary" {
                    continue;
                }
                self.dialog.push_result(KbFact {
                    name: r.name.clone(),
                    property: property.clone(),
                    value: value.clone(),
                });
            }
        }
        results.sort_by(crate::kb::presentation_order);
        let rejections = self.rng.gen_range(0..=max_rejections.min(results.len() - 1));
        let mut user = SILENCE.to_string();
        for r in &results[..rejections] {
            let proposal = fill(templates::PROPOSAL, &[("{name}", &r.name)]);
            self.ex(std::mem::take(&mut user), proposal);
            let reject = pick(&mut self.rng, templates::REJECTIONS);
            self.ex(reject, templates::OTHER_OPTION);
            user = SILENCE.to_string();
        }
        let chosen = results[rejections].clone();
        self.ex(user, fill(templates::PROPOSAL, &[("{name}", &chosen.name)]));
        let accept = pick(&mut self.rng, templates::ACCEPTANCES);
        self.ex(accept, templates::RESERVATION);
        Ok(chosen)
    }

    fn extra_information(&mut self, chosen: &KbRecord) {
        let mut asks = vec![
            (templates::ADDRESS_QUESTIONS, "R_address"),
            (templates::PHONE_QUESTIONS, "R_phone"),
        ];
        asks.shuffle(&mut self.rng);
        asks.truncate(self.rng.gen_range(1..=2));
        for (questions, property) in asks {
            let q = pick(&mut self.rng, questions);
            let answer = fill(templates::HERE_IT_IS, &[("{v}", chosen.get(property).unwrap_or(""))]);
            self.ex(q, answer);
        }
        let thanks = pick(&mut self.rng, templates::THANKS);
        self.ex(thanks, templates::WELCOME);
    }
}

fn generate_dialog(
    config: &GenConfig,
    kb: &KnowledgeBase,
    goals: &[Goal],
    task: TaskId,
    split: Split,
    index: usize,
) -> Result<Dialog> {
    let rng = sub_rng(config.seed, &[split.code(), task.number() as u64, index as u64]);
    let mut b = Builder {
        config,
        rng,
        dialog: Dialog::new(task),
    };
    let kb_goal = |b: &mut Builder| goals[b.rng.gen_range(0..goals.len())].clone();
    match task {
        TaskId::T1 => {
            let goal = b.random_goal();
            b.slot_filling(&goal, false);
        }
        TaskId::T2 => {
            let last = b.random_goal();
            let rounds = b.rng.gen_range(1..=3);
            let chain = b.revision_chain(last, rounds);
            b.slot_filling(&chain[0], false);
            b.revisions(&chain);
        }
        TaskId::T3 => {
            let goal = kb_goal(&mut b);
            b.slot_filling(&goal, true);
            b.options(kb, &goal, 2)?;
        }
        TaskId::T4 => {
            let goal = kb_goal(&mut b);
            b.slot_filling(&goal, true);
            let chosen = b.options(kb, &goal, 0)?;
            b.extra_information(&chosen);
        }
        TaskId::T5 => {
            let last = kb_goal(&mut b);
            let rounds = b.rng.gen_range(0..=2);
            let chain = b.revision_chain(last, rounds);
            b.slot_filling(&chain[0], false);
            b.revisions(&chain);
            let chosen = b.options(kb, chain.last().expect("non-empty chain"), 2)?;
            b.extra_information(&chosen);
        }
    }
    Ok(b.dialog)
}

fn generate_split(
    config: &GenConfig,
    kb: &KnowledgeBase,
    goals: &[Goal],
    split: Split,
    per_task: usize,
) -> Result<Vec<Dialog>> {
    let jobs: Vec<(TaskId, usize)> = config
        .tasks
        .iter()
        .flat_map(|&t| (0..per_task).map(move |i| (t, i)))
        .collect();
    jobs.par_iter()
        .map(|&(t, i)| generate_dialog(config, kb, goals, t, split, i))
        .collect()
}

pub fn generate(config: &GenConfig) -> Result<Generated> {
    config.validate()?;
    let mut rng = sub_rng(config.seed, &[0]);
    let (kb, goals) = build_kb(config, &mut rng)?;
    let train = generate_split(config, &kb, &goals, Split::Train, config.n_dialogs)?;
    let test = generate_split(config, &kb, &goals, Split::Test, config.test_dialogs)?;
    let pool: BTreeSet<String> = train
        .iter()
        .chain(&test)
        .flat_map(|d| d.exchanges().map(|(_, s)| s.to_string()))
        .collect();
    Ok(Generated {
        config: config.clone(),
        kb,
        train,
        test,
        pool: pool.into_iter().collect(),
    })
}

impl Generated {
    pub fn dialogs(&self, split: Split) -> &[Dialog] {
        match split {
            Split::Train => &self.train,
            Split::Test => &self.test,
        }
    }

    /// Distinct system utterances that distractors are drawn from.
    pub fn distractor_pool(&self) -> &[String] {
        &self.pool
    }

    /// One record per system turn of one dialog, in turn order.
    pub fn dialog_records(&self, split: Split, index: usize) -> Vec<EvalRecord> {
        let dialog = &self.dialogs(split)[index];
        let id = format!("{split}-{index}");
        let mut rng = sub_rng(self.config.seed, &[split.code() + 10, index as u64]);
        let mut context: Vec<ContextTurn> = Vec::new();
        let mut records = Vec::new();
        for turn in &dialog.turns {
            match turn {
                Turn::KbResult { fact, .. } => context.push(ContextTurn::Result { result: fact.clone() }),
                Turn::Exchange { user, system, .. } => {
                    let mut record_context = context.clone();
                    record_context.push(ContextTurn::Exchange {
                        user: user.clone(),
                        system: None,
                    });
                    let (candidates, answer_index) = self.candidates(&mut rng, system);
                    records.push(EvalRecord {
                        dialog_id: Some(id.clone()),
                        task: Some(dialog.task),
                        context: record_context,
                        candidates,
                        answer_index,
                    });
                    context.push(ContextTurn::Exchange {
                        user: user.clone(),
                        system: Some(system.clone()),
                    });
                }
            }
        }
        records
    }

    fn candidates(&self, rng: &mut ChaCha8Rng, gold: &str) -> (Vec<String>, usize) {
        let gold_tokens = text::tokenize(gold);
        let mut taken: BTreeSet<Vec<String>> = BTreeSet::from([gold_tokens]);
        let mut out = vec![gold.to_string()];
        let available = self.pool.len().saturating_sub(1);
        let want = (self.config.pool_size - 1).min(available);
        while out.len() < want + 1 {
            let c = &self.pool[rng.gen_range(0..self.pool.len())];
            if taken.insert(text::tokenize(c)) {
                out.push(c.clone());
            }
        }
        out.shuffle(rng);
        let answer = out.iter().position(|c| c == gold).expect("gold present");
        (out, answer)
    }

    pub fn records(&self, split: Split) -> Vec<EvalRecord> {
        (0..self.dialogs(split).len())
            .flat_map(|i| self.dialog_records(split, i))
            .collect()
    }
}
