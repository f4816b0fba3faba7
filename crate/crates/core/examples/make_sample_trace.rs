//! Generates the bundled single-node sample trace in Intel Lab format.
//!
//! Models an office temperature sensor over five days starting Saturday
//! 2004-02-28: night relaxation toward a setback temperature, HVAC warm-up
//! and duty cycling on weekdays, occupancy drift, ADC quantization of
//! 0.0098 °C, occasional reading glitches, jittered ~31 s sampling, bursty packet loss (roughly half of
//! the readings are delivered) and a few truncated lines.
//!
//! ```text
//! cargo run -p qsample-core --example make_sample_trace > crates/core/data/sample_node.txt
//! ```

use chrono::{Datelike, NaiveDate, Timelike, Weekday};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

const NODE_ID: u32 = 7;
const DAYS: i64 = 5;
const QUANTUM: f64 = 0.0098;
const OFFSET: f64 = -38.4;
/// Per-reading probability of a glitch, and the glitch spread in °C.
const GLITCH_RATE: f64 = 0.35;
const GLITCH_SD: f64 = 0.1;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(2004_0228);
    let start = NaiveDate::from_ymd_opt(2004, 2, 28)
        .unwrap()
        .and_hms_opt(0, 0, 0)
        .unwrap();
    let sensor_noise = Normal::new(0.0, 0.006).unwrap();
    let glitch = Normal::new(0.0, GLITCH_SD).unwrap();
    let occupancy_step = Normal::new(0.0, 0.002).unwrap();
    let jitter = Normal::new(0.0, 1.5).unwrap();

    let end = DAYS * 86_400;
    let mut t = 0.0f64;
    let mut epoch = 0u64;
    let mut temp = 17.8f64;
    let mut occupancy = 0.0f64;
    let mut hvac_phase = 0.0f64;
    let mut humidity = 38.0f64;
    let mut voltage = 2.74f64;
    let mut last_t = 0.0f64;
    let mut lossy_burst = false;

    while (t as i64) < end {
        let dt = t - last_t;
        last_t = t;
        let now = start + chrono::Duration::milliseconds((t * 1000.0) as i64);
        let hour = now.hour() as f64 + now.minute() as f64 / 60.0;
        let weekday = !matches!(now.weekday(), Weekday::Sat | Weekday::Sun);
        let occupied = weekday && (7.5..18.5).contains(&hour);
        let hvac_on = weekday && (6.5..19.0).contains(&hour);

        // Setpoint the room relaxes toward.
        let target = if hvac_on {
            22.6
        } else if !weekday && (10.0..16.0).contains(&hour) {
            18.6 + 0.8 * ((hour - 10.0) / 6.0 * std::f64::consts::PI).sin()
        } else {
            17.4
        };
        let time_constant = if hvac_on { 3600.0 } else { 21_600.0 };
        temp += (target - temp) * (1.0 - (-dt / time_constant).exp());

        // Thermostat duty cycling with a slowly wandering period.
        let cycle = if hvac_on {
            hvac_phase += dt / (1100.0 + 200.0 * rng.random::<f64>()) * std::f64::consts::TAU;
            0.02 * hvac_phase.sin()
        } else {
            0.0
        };

        if occupied {
            occupancy += occupancy_step.sample(&mut rng);
            occupancy *= 0.995;
        } else {
            occupancy *= 0.98;
        }

        let true_temp = temp + cycle + occupancy;
        let mut measured = true_temp + sensor_noise.sample(&mut rng);
        if rng.random::<f64>() < GLITCH_RATE {
            measured += glitch.sample(&mut rng);
        }
        let raw = ((measured - OFFSET) / QUANTUM).round();
        let reported = OFFSET + QUANTUM * raw;

        humidity += 0.02 * (if occupied { 41.0 } else { 36.0 } - humidity) + 0.05 * rng.random::<f64>() - 0.025;
        voltage -= 2.0e-6;
        let light = if occupied { 300.0 + 40.0 * rng.random::<f64>() } else { 0.46 };

        let stamp = now.format("%Y-%m-%d %H:%M:%S%.6f");
        // Two-state bursty loss channel.
        let flip: f64 = rng.random();
        if lossy_burst && flip < 1.0 / 24.0 {
            lossy_burst = false;
        } else if !lossy_burst && flip < 1.0 / 30.0 {
            lossy_burst = true;
        }
        let loss = if lossy_burst { 0.93 } else { 0.12 };
        let roll: f64 = rng.random();
        if roll < loss {
            // reading lost in transit
        } else if roll < loss + 0.004 {
            println!("{stamp} {epoch} {NODE_ID}");
        } else {
            println!(
                "{stamp} {epoch} {NODE_ID} {reported:.4} {humidity:.4} {light:.2} {voltage:.5}"
            );
        }

        epoch += 1;
        let gap: f64 = if rng.random::<f64>() < 0.0008 { 600.0 } else { 31.0 };
        t += (gap + jitter.sample(&mut rng)).max(20.0);
    }
}
