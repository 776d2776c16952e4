//! Population-based search primitives: named-tensor individuals, populations,
//! and the populate → perturb → assess → reduce pipeline they compose into.
//!
//! Every stage returns new values — the input individual is never mutated —
//! and an individual's assessment is only trusted while its fields are
//! unchanged (a generation counter invalidates stale scores).

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::kaku::Assessment;
use crate::numerics::{Matrix, Rng};

/// One element of a population: a named map of matrices plus, when fresh, an
/// assessment of exactly those values.
#[derive(Debug, Clone, Default)]
pub struct Individual {
    fields: BTreeMap<String, Matrix>,
    generation: u64,
    assessment: Option<(u64, Assessment)>,
}

impl Individual {
    pub fn new() -> Self {
        Individual::default()
    }

    pub fn with_field(mut self, name: &str, value: Matrix) -> Self {
        self.set_field(name, value);
        self
    }

    /// Replace a field; any previous assessment becomes stale.
    pub fn set_field(&mut self, name: &str, value: Matrix) {
        self.fields.insert(name.to_string(), value);
        self.generation += 1;
    }

    pub fn field(&self, name: &str) -> Option<&Matrix> {
        self.fields.get(name)
    }

    pub fn field_names(&self) -> impl Iterator<Item = &str> {
        self.fields.keys().map(|s| s.as_str())
    }

    pub fn fields(&self) -> impl Iterator<Item = (&str, &Matrix)> {
        self.fields.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn record_assessment(&mut self, assessment: Assessment) {
        self.assessment = Some((self.generation, assessment));
    }

    /// The assessment, if it refers to the current field values.
    pub fn assessment(&self) -> Option<Assessment> {
        match self.assessment {
            Some((gen, a)) if gen == self.generation => Some(a),
            _ => None,
        }
    }

    pub fn clear_assessment(&mut self) {
        self.assessment = None;
    }

    pub fn same_schema(&self, other: &Individual) -> bool {
        self.fields.len() == other.fields.len()
            && self.fields.iter().all(|(k, v)| {
                other
                    .fields
                    .get(k)
                    .map_or(false, |o| o.shape() == v.shape())
            })
    }
}

/// A group of individuals with identical field schemas.
#[derive(Debug, Clone)]
pub struct Population {
    members: Vec<Individual>,
}

impl Population {
    pub fn new(members: Vec<Individual>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::Config("a population needs at least one member".into()));
        }
        for (i, m) in members.iter().enumerate() {
            if !m.same_schema(&members[0]) {
                return Err(Error::Config(format!(
                    "population member {i} does not share the schema of member 0"
                )));
            }
        }
        Ok(Population { members })
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn member(&self, i: usize) -> &Individual {
        &self.members[i]
    }

    pub fn members(&self) -> &[Individual] {
        &self.members
    }
}

/// `k` deep copies of the individual, assessments cleared.
pub fn populate(individual: &Individual, k: usize) -> Result<Population> {
    if k < 1 {
        return Err(Error::Config(format!(
            "population size must be at least 1, got {k}"
        )));
    }
    let mut member = individual.clone();
    member.clear_assessment();
    Population::new(vec![member; k])
}

/// Add i.i.d. gaussian noise to every field of every member; with
/// `preserve_first` member 0 rides along unperturbed (elitism).
pub fn perturb_gaussian(
    population: &Population,
    std: f64,
    rng: &mut Rng,
    preserve_first: bool,
) -> Result<Population> {
    if std < 0.0 {
        return Err(Error::Config(format!(
            "perturbation std must be non-negative, got {std}"
        )));
    }
    let mut members = Vec::with_capacity(population.len());
    for (i, member) in population.members().iter().enumerate() {
        if i == 0 && preserve_first {
            members.push(member.clone());
            continue;
        }
        let mut perturbed = member.clone();
        let names: Vec<String> = member.field_names().map(str::to_string).collect();
        for name in names {
            let field = member.field(&name).unwrap();
            let noise = rng.gaussian(field.rows(), field.cols(), 0.0, std);
            perturbed.set_field(&name, field.add(&noise)?);
        }
        members.push(perturbed);
    }
    Population::new(members)
}

/// Evaluate every member with the objective, in member order.
pub fn assess_population(
    population: &Population,
    objective: &dyn Fn(&Individual) -> Result<Assessment>,
) -> Result<Population> {
    let mut members = Vec::with_capacity(population.len());
    for (index, member) in population.members().iter().enumerate() {
        let assessment = objective(member).map_err(|e| Error::ObjectiveFailure {
            index,
            source: Box::new(e),
        })?;
        let mut assessed = member.clone();
        assessed.record_assessment(assessment);
        members.push(assessed);
    }
    Population::new(members)
}

/// The member with the best fresh assessment; ties go to the lowest index.
pub fn reduce_best(population: &Population) -> Result<Individual> {
    let mut best: Option<(usize, Assessment)> = None;
    for (i, member) in population.members().iter().enumerate() {
        let a = member
            .assessment()
            .ok_or(Error::MissingAssessment { index: i })?;
        match best {
            Some((_, current)) if !a.better_than(&current) => {}
            _ => best = Some((i, a)),
        }
    }
    let (index, _) = best.expect("populations are non-empty");
    Ok(population.member(index).clone())
}

/// One hill-climbing move: populate, perturb around the current point with
/// elitism, assess everything, keep the best.
pub fn climb_hill(
    individual: &Individual,
    k: usize,
    std: f64,
    objective: &dyn Fn(&Individual) -> Result<Assessment>,
    rng: &mut Rng,
) -> Result<Individual> {
    let population = populate(individual, k)?;
    let population = perturb_gaussian(&population, std, rng, true)?;
    let population = assess_population(&population, objective)?;
    reduce_best(&population)
}
