//! Ingestion tour: synthesize a drifting series, write it in the hourly-load
//! CSV dialect, re-parse it, stream it month by month, and split it at the
//! train/test boundary.

use timesmooth::data::{
    boundary_before_end, monthly_stream, protocol_split, read_series_csv, synth_drift_demand,
    write_series_csv, DriftSpec,
};

fn main() {
    let spec = DriftSpec::default();
    let records = synth_drift_demand(&spec, 6).expect("synthetic series");
    println!("generated {} hourly records ({} months)", records.len(), 6);

    let mut buf = Vec::new();
    write_series_csv(&records, &mut buf).expect("write csv");
    println!("canonical CSV: {} bytes", buf.len());

    let parsed = read_series_csv(buf.as_slice()).expect("re-parse");
    assert_eq!(parsed.records, records);
    println!("round trip exact, {} missing loads", parsed.missing);

    let chunks = monthly_stream(&parsed.records, 2005, 1).expect("monthly stream");
    println!("monthly chunks: {:?}", chunks.iter().map(|c| c.records.len()).collect::<Vec<_>>());

    let boundary = boundary_before_end(&parsed.records, 2).expect("boundary");
    let (train, test) = protocol_split(&parsed.records, boundary).expect("split");
    println!(
        "split at {boundary}: {} training hours, {} test hours",
        train.len(),
        test.len()
    );
}
