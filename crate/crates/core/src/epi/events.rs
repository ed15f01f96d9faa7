use crate::error::{Error, Result};

use super::RemovalData;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TimeScale {
    /// Integer days; several events may share a day.
    Discrete,
    /// Real-valued times; ties have probability zero and are rejected.
    Continuous,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EventKind {
    Infection,
    Removal,
}

impl EventKind {
    pub fn code(self) -> char {
        match self {
            EventKind::Infection => 'I',
            EventKind::Removal => 'R',
        }
    }

    pub fn from_code(code: &str) -> Option<Self> {
        match code {
            "I" => Some(EventKind::Infection),
            "R" => Some(EventKind::Removal),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub time: f64,
    pub kind: EventKind,
    /// Label of the individual involved. Continuous-time trajectories are
    /// label-free; discrete-time ones label individuals 1..n by removal order.
    pub individual: Option<usize>,
}

impl Event {
    pub fn infection(time: f64, individual: Option<usize>) -> Self {
        Event {
            time,
            kind: EventKind::Infection,
            individual,
        }
    }

    pub fn removal(time: f64, individual: Option<usize>) -> Self {
        Event {
            time,
            kind: EventKind::Removal,
            individual,
        }
    }
}

/// A complete event history of a single-population SIR epidemic.
///
/// Events are kept sorted by time, infections before removals on equal
/// (discrete) times. The running susceptible/infective counts `(X(t), Y(t))`
/// are piecewise constant and right-continuous.
#[derive(Debug, Clone, PartialEq)]
pub struct EpidemicEvents {
    events: Vec<Event>,
    population: usize,
    time_scale: TimeScale,
    // cumulative infections / removals after each event
    cum_infections: Vec<usize>,
    cum_removals: Vec<usize>,
}

impl EpidemicEvents {
    pub fn new(mut events: Vec<Event>, population: usize, time_scale: TimeScale) -> Result<Self> {
        if events.is_empty() {
            return Err(Error::Usage("an epidemic needs at least one event".into()));
        }
        if let Some(e) = events.iter().find(|e| !e.time.is_finite()) {
            return Err(Error::Usage(format!("non-finite event time {}", e.time)));
        }
        if time_scale == TimeScale::Discrete {
            if let Some(e) = events.iter().find(|e| e.time.fract() != 0.0) {
                return Err(Error::Usage(format!(
                    "discrete-time event at non-integer time {}",
                    e.time
                )));
            }
        }
        events.sort_by(|a, b| a.time.total_cmp(&b.time).then(a.kind.cmp(&b.kind)));

        let mut cum_infections = Vec::with_capacity(events.len());
        let mut cum_removals = Vec::with_capacity(events.len());
        let (mut infections, mut removals) = (0usize, 0usize);
        for e in &events {
            match e.kind {
                EventKind::Infection => infections += 1,
                EventKind::Removal => removals += 1,
            }
            cum_infections.push(infections);
            cum_removals.push(removals);
        }
        let out = EpidemicEvents {
            events,
            population,
            time_scale,
            cum_infections,
            cum_removals,
        };
        out.validate()?;
        Ok(out)
    }

    /// Checks the count invariants on every group of simultaneous events.
    fn validate(&self) -> Result<()> {
        let first = &self.events[0];
        if first.kind != EventKind::Infection {
            return Err(Error::Usage("the first event must be the initial infection".into()));
        }
        if self.total_infections() > self.population {
            return Err(Error::Usage(format!(
                "{} infections in a population of {}",
                self.total_infections(),
                self.population
            )));
        }
        let mut start = 0;
        while start < self.events.len() {
            let t = self.events[start].time;
            let mut end = start;
            while end < self.events.len() && self.events[end].time == t {
                end += 1;
            }
            if self.time_scale == TimeScale::Continuous && end - start > 1 {
                return Err(Error::Usage(format!("tied continuous-time events at {t}")));
            }
            let (inf_before, rem_before) = if start == 0 {
                (0, 0)
            } else {
                (self.cum_infections[start - 1], self.cum_removals[start - 1])
            };
            let y_left = inf_before - rem_before.min(inf_before);
            let new_inf = self.cum_infections[end - 1] - inf_before;
            let new_rem = self.cum_removals[end - 1] - rem_before;
            if start == 0 {
                if new_inf != 1 {
                    return Err(Error::Usage("exactly one initial infective is required".into()));
                }
            } else if new_inf > 0 && y_left == 0 {
                return Err(Error::Usage(format!("infection at {t} with no infectives present")));
            }
            if new_rem > y_left {
                return Err(Error::Usage(format!(
                    "{new_rem} removals at {t} but only {y_left} infectives present"
                )));
            }
            start = end;
        }
        Ok(())
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn population(&self) -> usize {
        self.population
    }

    pub fn time_scale(&self) -> TimeScale {
        self.time_scale
    }

    pub fn initial_time(&self) -> f64 {
        self.events[0].time
    }

    pub fn total_infections(&self) -> usize {
        *self.cum_infections.last().unwrap_or(&0)
    }

    pub fn total_removals(&self) -> usize {
        *self.cum_removals.last().unwrap_or(&0)
    }

    /// Number of individuals ever infected.
    pub fn final_size(&self) -> usize {
        self.total_infections()
    }

    /// True when no infectives remain after the last event.
    pub fn is_complete(&self) -> bool {
        self.total_infections() == self.total_removals()
    }

    pub fn infection_times(&self) -> Vec<f64> {
        self.times_of(EventKind::Infection)
    }

    pub fn removal_times(&self) -> Vec<f64> {
        self.times_of(EventKind::Removal)
    }

    fn times_of(&self, kind: EventKind) -> Vec<f64> {
        self.events
            .iter()
            .filter(|e| e.kind == kind)
            .map(|e| e.time)
            .collect()
    }

    fn counts_after(&self, n_events: usize) -> (usize, usize) {
        if n_events == 0 {
            return (self.population, 0);
        }
        let inf = self.cum_infections[n_events - 1];
        let rem = self.cum_removals[n_events - 1];
        (self.population - inf, inf - rem)
    }

    fn check_domain(&self, t: f64) -> Result<()> {
        if t.is_nan() || t < self.initial_time() {
            return Err(Error::Domain(format!(
                "time {t} precedes the initial infection at {}",
                self.initial_time()
            )));
        }
        Ok(())
    }

    /// `(X(t), Y(t))`, counting all events at times `<= t`.
    pub fn counts(&self, t: f64) -> Result<(usize, usize)> {
        self.check_domain(t)?;
        let n = self.events.partition_point(|e| e.time <= t);
        Ok(self.counts_after(n))
    }

    /// Left limits `(X(t-), Y(t-))`, counting events at times `< t`.
    pub fn counts_left(&self, t: f64) -> Result<(usize, usize)> {
        self.check_domain(t)?;
        let n = self.events.partition_point(|e| e.time < t);
        Ok(self.counts_after(n))
    }

    /// Counts immediately after every event, in event order.
    pub fn count_path(&self) -> impl Iterator<Item = (f64, usize, usize)> + '_ {
        self.events.iter().enumerate().map(|(k, e)| {
            let (x, y) = self.counts_after(k + 1);
            (e.time, x, y)
        })
    }

    /// The observable part of the epidemic: its removal times.
    pub fn removal_data(&self) -> Result<RemovalData> {
        RemovalData::new(self.removal_times(), self.population, self.time_scale)
    }

    /// Per-individual `(infection, removal)` times for labelled trajectories,
    /// indexed by label - 1. `None` when any event is unlabelled.
    pub fn labelled_histories(&self) -> Option<Vec<(f64, Option<f64>)>> {
        let n = self.total_infections();
        let mut out: Vec<(Option<f64>, Option<f64>)> = vec![(None, None); n];
        for e in &self.events {
            let label = e.individual?;
            let slot = out.get_mut(label.checked_sub(1)?)?;
            match e.kind {
                EventKind::Infection => slot.0 = Some(e.time),
                EventKind::Removal => slot.1 = Some(e.time),
            }
        }
        out.into_iter().map(|(i, r)| Some((i?, r))).collect()
    }
}

/// `(X(t), Y(t))` for a validated event history.
pub fn trajectory_counts(events: &EpidemicEvents, t: f64) -> Result<(usize, usize)> {
    events.counts(t)
}
