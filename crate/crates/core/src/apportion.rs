//! D'Hondt highest-averages seat allocation.
//!
//! Quotients are kept as exact rationals and compared by cross-multiplication
//! in 128-bit integers, so allocations never depend on floating-point
//! rounding. Equal quotients go to the entity with more raw votes, then to the
//! lexicographically smaller id.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashSet};
use std::fmt;

use thiserror::Error;

/// Integer vote count.
pub type Votes = u64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ApportionError {
    #[error("empty electorate: no entity has a positive vote count")]
    EmptyElectorate,
    #[error("invalid seat count {0}: at least one seat is required")]
    InvalidSeatCount(u64),
    #[error("duplicate entity id {0:?}")]
    DuplicateEntity(String),
}

/// An exact non-negative rational `num / den` with `den >= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Quotient {
    num: u64,
    den: u64,
}

impl Quotient {
    /// Panics if `den` is zero.
    pub fn new(num: u64, den: u64) -> Self {
        assert!(den > 0, "quotient denominator must be positive");
        Self { num, den }
    }

    pub fn numerator(&self) -> u64 {
        self.num
    }

    pub fn denominator(&self) -> u64 {
        self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num == 0
    }

    pub fn to_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// `floor(votes / self)`, i.e. how many divisors `j >= 1` satisfy
    /// `votes / j >= self`. `self` must be non-zero.
    fn divide_floor(&self, votes: Votes) -> u128 {
        match votes.checked_mul(self.den) {
            Some(p) => u128::from(p / self.num),
            None => (votes as u128 * self.den as u128) / self.num as u128,
        }
    }

    /// Whether `votes / self` is a positive integer.
    fn divides_exactly(&self, votes: Votes) -> bool {
        votes > 0
            && match votes.checked_mul(self.den) {
                Some(p) => p.is_multiple_of(self.num),
                None => (votes as u128 * self.den as u128).is_multiple_of(self.num as u128),
            }
    }
}

impl Ord for Quotient {
    fn cmp(&self, other: &Self) -> Ordering {
        let lhs = self.num as u128 * other.den as u128;
        let rhs = other.num as u128 * self.den as u128;
        lhs.cmp(&rhs)
    }
}

impl PartialOrd for Quotient {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Quotient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

/// The seat ratio `votes / (seats_held + 1)`.
pub fn quotient(votes: Votes, seats_held: u64) -> Quotient {
    Quotient::new(votes, seats_held + 1)
}

/// A party in the allocation: a feature or an alliance of features.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entity {
    pub id: String,
    pub votes: Votes,
}

impl Entity {
    pub fn new(id: impl Into<String>, votes: Votes) -> Self {
        Self {
            id: id.into(),
            votes,
        }
    }
}

/// One round of the iterative allocation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AllocationStep {
    /// Zero-based round index.
    pub round: u64,
    pub winner: String,
    /// The winner's quotient at the moment it was awarded the seat.
    pub quotient: Quotient,
}

/// Seat counts per entity, in the order the entities were supplied.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeatAllocation {
    entries: Vec<(String, Votes, u64)>,
    total_seats: u64,
    log: Vec<AllocationStep>,
}

impl SeatAllocation {
    pub fn total_seats(&self) -> u64 {
        self.total_seats
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `(entity id, seats)` in input order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, u64)> + '_ {
        self.entries.iter().map(|(id, _, s)| (id.as_str(), *s))
    }

    /// Votes each entity competed with, in input order.
    pub fn votes(&self) -> impl Iterator<Item = (&str, Votes)> + '_ {
        self.entries.iter().map(|(id, v, _)| (id.as_str(), *v))
    }

    pub fn seats_of(&self, id: &str) -> Option<u64> {
        self.entries
            .iter()
            .find(|(e, _, _)| e == id)
            .map(|(_, _, s)| *s)
    }

    pub fn seat_map(&self) -> BTreeMap<String, u64> {
        self.iter().map(|(id, s)| (id.to_string(), s)).collect()
    }

    /// Seat counts as a vector in input order.
    pub fn seat_vector(&self) -> Vec<u64> {
        self.entries.iter().map(|(_, _, s)| *s).collect()
    }

    /// Round-by-round record. Empty for allocations produced by the divisor oracle.
    pub fn log(&self) -> &[AllocationStep] {
        &self.log
    }

    /// Entities sorted by descending seats, ties by ascending id.
    pub fn ranked(&self) -> Vec<(&str, u64)> {
        let mut ranked: Vec<_> = self.iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        ranked
    }

    /// Appends entities that did not take part in the allocation with zero seats,
    /// so that reports can list them. Ids already present are skipped.
    pub fn with_unseated<I, S>(mut self, ids: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        for id in ids {
            let id = id.into();
            if !self.entries.iter().any(|(e, _, _)| *e == id) {
                self.entries.push((id, 0, 0));
            }
        }
        self
    }
}

fn validate(entities: &[Entity], total_seats: u64) -> Result<(), ApportionError> {
    if total_seats < 1 {
        return Err(ApportionError::InvalidSeatCount(total_seats));
    }
    let duplicate = if entities.len() <= 16 {
        (1..entities.len()).find_map(|i| entities[..i].iter().find(|e| e.id == entities[i].id))
    } else {
        let mut seen = HashSet::with_capacity(entities.len());
        entities.iter().find(|e| !seen.insert(e.id.as_str()))
    };
    if let Some(e) = duplicate {
        return Err(ApportionError::DuplicateEntity(e.id.clone()));
    }
    if entities.iter().all(|e| e.votes == 0) {
        return Err(ApportionError::EmptyElectorate);
    }
    Ok(())
}

/// Whether `a` wins a tie-broken comparison against `b` for equal quotients.
fn tie_precedes(a: &Entity, b: &Entity) -> bool {
    match a.votes.cmp(&b.votes) {
        Ordering::Greater => true,
        Ordering::Less => false,
        Ordering::Equal => a.id < b.id,
    }
}

fn award_seats(
    entities: &[Entity],
    total_seats: u64,
    mut on_award: impl FnMut(u64, usize, Quotient),
) -> Vec<u64> {
    let mut seats = vec![0u64; entities.len()];
    for round in 0..total_seats {
        let mut best = 0usize;
        let mut best_q = quotient(entities[0].votes, seats[0]);
        for (i, e) in entities.iter().enumerate().skip(1) {
            let q = quotient(e.votes, seats[i]);
            let better = match q.cmp(&best_q) {
                Ordering::Greater => true,
                Ordering::Less => false,
                Ordering::Equal => tie_precedes(e, &entities[best]),
            };
            if better {
                best = i;
                best_q = q;
            }
        }
        seats[best] += 1;
        on_award(round, best, best_q);
    }
    seats
}

fn into_allocation(
    entities: &[Entity],
    seats: Vec<u64>,
    total_seats: u64,
    log: Vec<AllocationStep>,
) -> SeatAllocation {
    SeatAllocation {
        entries: entities
            .iter()
            .zip(seats)
            .map(|(e, s)| (e.id.clone(), e.votes, s))
            .collect(),
        total_seats,
        log,
    }
}

/// Awards `total_seats` seats one at a time to the entity with the highest
/// current quotient `votes / (seats + 1)`.
pub fn dhondt_allocate(
    entities: &[Entity],
    total_seats: u64,
) -> Result<SeatAllocation, ApportionError> {
    validate(entities, total_seats)?;
    let mut log = Vec::with_capacity(total_seats as usize);
    let seats = award_seats(entities, total_seats, |round, winner, quotient| {
        log.push(AllocationStep {
            round,
            winner: entities[winner].id.clone(),
            quotient,
        })
    });
    Ok(into_allocation(entities, seats, total_seats, log))
}

/// Seat counts of [`dhondt_allocate`] in input order, without the round log.
pub fn dhondt_seats(entities: &[Entity], total_seats: u64) -> Result<Vec<u64>, ApportionError> {
    validate(entities, total_seats)?;
    Ok(award_seats(entities, total_seats, |_, _, _| {}))
}

/// Divisor formulation of D'Hondt, kept independent of [`dhondt_allocate`]
/// for cross-checking.
///
/// Finds the largest divisor `d` among the candidate quotients `v_i / j` such
/// that `sum_i floor(v_i / d) >= total_seats`, which is the `total_seats`-th
/// largest candidate counted with multiplicity. Entities receive every seat
/// whose quotient is strictly above `d`; the seats left over go to entities
/// with a quotient exactly equal to `d`, by the same tie rule as the
/// iterative method.
pub fn divisor_oracle_allocate(
    entities: &[Entity],
    total_seats: u64,
) -> Result<SeatAllocation, ApportionError> {
    let seats = divisor_oracle_seats(entities, total_seats)?;
    Ok(into_allocation(entities, seats, total_seats, Vec::new()))
}

/// Seat counts of [`divisor_oracle_allocate`] in input order.
pub fn divisor_oracle_seats(
    entities: &[Entity],
    total_seats: u64,
) -> Result<Vec<u64>, ApportionError> {
    validate(entities, total_seats)?;

    let mut candidates: Vec<Quotient> = entities
        .iter()
        .filter(|e| e.votes > 0)
        .flat_map(|e| (1..=total_seats).map(move |j| Quotient::new(e.votes, j)))
        .collect();
    let (_, &mut divisor, _) =
        candidates.select_nth_unstable_by(total_seats as usize - 1, |a, b| b.cmp(a));
    debug_assert!(
        entities
            .iter()
            .map(|e| divisor.divide_floor(e.votes))
            .sum::<u128>()
            >= u128::from(total_seats)
    );

    let mut seats: Vec<u64> = entities
        .iter()
        .map(|e| {
            let at_or_above = divisor.divide_floor(e.votes);
            let exact = u128::from(divisor.divides_exactly(e.votes));
            (at_or_above - exact) as u64
        })
        .collect();

    let mut tied: Vec<usize> = (0..entities.len())
        .filter(|&i| divisor.divides_exactly(entities[i].votes))
        .collect();
    tied.sort_by(|&a, &b| {
        entities[b]
            .votes
            .cmp(&entities[a].votes)
            .then_with(|| entities[a].id.cmp(&entities[b].id))
    });
    let remaining = total_seats - seats.iter().sum::<u64>();
    for &i in tied.iter().take(remaining as usize) {
        seats[i] += 1;
    }
    Ok(seats)
}
