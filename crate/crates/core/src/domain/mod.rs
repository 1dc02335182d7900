//! Shared domain types: band identities, time axes and per-pixel series.

mod bands;
mod series;
mod time;

pub use bands::{BandId, BAND_COUNT};
pub use series::{PixelId, PixelSeries, WindowSpec, SUPPORTED_WINDOWS};
pub use time::{TimeAxis, RAW_STEP_DAYS, WEEK_STEP_DAYS};
