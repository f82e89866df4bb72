//! Evaluation toolkit for interval energy-consumption forecasts.
//!
//! The crate bundles three layers:
//!
//! * data handling for 15-min and 24-hour kWh series ([`series`]),
//! * candidate forecasters: seasonal-mean baselines ([`baselines`]), a CART
//!   regression tree ([`rtree`]) and ARIMA fitted by conditional sum of squares
//!   ([`arima`]),
//! * the measure suite ([`measures`]) and a rolling-origin harness
//!   ([`backtest`], [`costs`], [`synthetic`], [`profiles`], [`report`],
//!   [`config`]) that turns backtests into measure reports and cost-benefit
//!   rankings under application profiles.

pub mod arima;
pub mod backtest;
pub mod baselines;
pub mod config;
pub mod costs;
pub mod error;
pub mod measures;
pub mod optim;
pub mod profiles;
pub mod report;
pub mod rtree;
pub mod series;
pub mod synthetic;

pub use error::{Error, ErrorClass, Result};
pub use measures::{ApplicationProfile, CostRecord, ForecastRun, MeasureReport};
pub use series::{FeatureRow, FeatureTable, Granularity, IntervalSeries, TrainTestSplit};
