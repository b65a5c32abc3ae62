//! Reproducible studies built on the simulator. Each study returns a report
//! whose serialized form depends only on its configuration and seed.

pub mod channel;
pub mod coherence;
pub mod divisions;
pub mod pps;
pub mod timedisc;

use crate::error::{Error, Result};

/// Render rows as CSV with a header.
pub(crate) fn csv_string<I, R>(header: &[&str], rows: I) -> Result<String>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    let fail = |e: csv::Error| Error::invalid(format!("csv: {e}"));
    w.write_record(header).map_err(fail)?;
    for r in rows {
        w.write_record(r.into_iter()).map_err(fail)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::invalid(format!("csv: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::invalid(e.to_string()))
}
