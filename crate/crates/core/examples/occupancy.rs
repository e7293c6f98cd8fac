//! Bursty access-point traffic: draw an on/off trace and compare its busy
//! share with the renewal-theory value.

use fedrem::synth::{generate_occupancy_trace, TrafficModel};

fn main() -> fedrem::error::Result<()> {
    let traffic = TrafficModel::default();
    let trace = generate_occupancy_trace(&traffic, 60_000.0, 1)?;

    println!(
        "{} bursts in one minute, busy {:.3}% of the time (expected {:.3}%)",
        trace.busy.len(),
        100.0 * trace.busy_time_ms() / trace.duration_ms,
        100.0 * traffic.busy_fraction()
    );
    for iv in trace.busy.iter().take(5) {
        println!("  busy {:9.2} .. {:9.2} ms", iv.start_ms, iv.end_ms);
    }
    Ok(())
}
