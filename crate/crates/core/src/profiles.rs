//! Named application profiles with shipped defaults.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{ApplicationProfile, CostSchedule, ModelFamily};

const YEAR: &str = "1 year";
const FOUR_WEEKS: &str = "4 weeks";

fn profile(
    name: &str,
    (alpha, beta, error_tolerance): (f64, f64, f64),
    (tau, pi): (f64, f64),
    duration: &str,
    horizon: usize,
    time_series: Option<(f64, f64)>,
) -> ApplicationProfile {
    let mut schedules = BTreeMap::new();
    if let Some((tau, pi)) = time_series {
        schedules.insert(ModelFamily::TimeSeries, CostSchedule { tau, pi });
    }
    ApplicationProfile {
        name: name.to_string(),
        alpha,
        beta,
        error_tolerance,
        tau,
        pi,
        duration: duration.to_string(),
        horizon,
        schedules,
    }
}

/// Ordered collection of profiles, looked up by name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProfileRegistry {
    profiles: Vec<ApplicationProfile>,
}

impl Default for ProfileRegistry {
    fn default() -> Self {
        ProfileRegistry::defaults()
    }
}

impl ProfileRegistry {
    pub fn empty() -> Self {
        ProfileRegistry { profiles: Vec::new() }
    }

    /// Planning, customer-education and demand-response profiles. The (tau, pi)
    /// on each profile is the regression-tree schedule; time-series models are
    /// retrained per use and carry their own schedule.
    pub fn defaults() -> Self {
        let profiles = vec![
            // horizon: two months of days
            profile("Planning-buildings", (0.5, 1.5, 0.15), (1.0, 6.0), YEAR, 60, None),
            profile("Planning-campus", (1.0, 1.0, 0.10), (1.0, 6.0), YEAR, 60, None),
            profile("CustEd-24h", (0.75, 1.25, 0.15), (1.0, 28.0), FOUR_WEEKS, 1, Some((0.0, 28.0))),
            // 8 uses a day at a 2-hour horizon
            profile("CustEd-15min", (1.5, 0.5, 0.10), (1.0, 224.0), FOUR_WEEKS, 8, Some((0.0, 224.0))),
            // three uses per weekday at a 6-hour horizon; trees retrained weekly
            profile("DR-campus", (0.5, 1.5, 0.05), (4.0, 15.0), FOUR_WEEKS, 24, Some((0.0, 60.0))),
            profile("DR-buildings", (0.5, 1.5, 0.10), (4.0, 15.0), FOUR_WEEKS, 24, Some((0.0, 60.0))),
        ];
        ProfileRegistry { profiles }
    }

    pub fn get(&self, name: &str) -> Result<&ApplicationProfile> {
        self.profiles
            .iter()
            .find(|p| p.name == name)
            .ok_or_else(|| Error::UnknownProfile(name.to_string()))
    }

    /// Add a profile, replacing any existing one of the same name.
    pub fn insert(&mut self, p: ApplicationProfile) -> Result<()> {
        p.validate()?;
        match self.profiles.iter_mut().find(|q| q.name == p.name) {
            Some(slot) => *slot = p,
            None => self.profiles.push(p),
        }
        Ok(())
    }

    pub fn names(&self) -> Vec<&str> {
        self.profiles.iter().map(|p| p.name.as_str()).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &ApplicationProfile> {
        self.profiles.iter()
    }

    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        self.profiles.iter().try_for_each(ApplicationProfile::validate)
    }
}
