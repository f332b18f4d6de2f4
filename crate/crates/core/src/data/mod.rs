//! Log ingestion, vocabulary construction and the pretrain/streaming split.

mod batch;
mod hour;
mod ingest;
mod schedule;
mod vocab;

pub use batch::{batches, BatchPlan};
pub use hour::{format_hour_stamp, parse_hour_stamp};
pub use ingest::{ingest, FormatDescriptor, RawLog, RawRecord};
pub use schedule::{make_schedule, HourBucket, HourCount, ScheduleMeta, StreamSchedule};
pub use vocab::{build_vocab, encode, EncodedSample, VocabMap, OOV_INDEX};
