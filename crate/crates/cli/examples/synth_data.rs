//! Generates the synthetic WONDER-style fixtures under `data/`.
//!
//! The overdose model is run forward from the initial profile with fixed
//! parameters (a finer step than the filter uses), annual deaths are drawn
//! from a Poisson law and counts 1-9 are suppressed. Year totals include
//! the suppressed cells and a few deaths of unknown age.
//!
//! ```text
//! cargo run --release -p mortcast-cli --example synth_data -- [out_dir]
//! ```

use std::fs;
use std::path::PathBuf;

use mortcast::dataio::{write_canonical, write_wonder, ObservationBatch};
use mortcast::enkf::StateSpaceModel;
use mortcast::overdose::{FitSettings, OverdoseParams};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

const SEED: u64 = 20_231_998;
const FIRST_YEAR: i32 = 1999;
const LAST_YEAR: i32 = 2020;
const SUBSTEPS: usize = 50;

fn truth(year: i32) -> OverdoseParams<f64> {
    // Mortality rises in the last year of the record.
    let mu = if year == 2020 { 1.15e-3 } else { 9e-4 };
    OverdoseParams::new(mu, 0.012, 15.0, 1.0 / 3.0, 16.0, 0.5).expect("valid truth")
}

fn main() {
    let out: PathBuf = std::env::args().nth(1).map_or_else(|| "data".into(), PathBuf::from);
    let settings = FitSettings::<f64>::default();
    let model = settings.build_model().expect("default model");
    let dim = model.state_dim();
    let dt = 1.0 / SUBSTEPS as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);

    let mut x = model.initial_state(&truth(1998));
    let mut rate = vec![0.0; dim];
    let mut batches = Vec::new();
    for year in 1998..=LAST_YEAR {
        let p = truth(year).to_array();
        x[model.param_range()].copy_from_slice(&p);
        x[model.deaths_range()].iter_mut().for_each(|v| *v = 0.0);
        let t0 = (year - 1998) as f64;
        for s in 0..SUBSTEPS {
            model.drift(&x, t0 + s as f64 * dt, &mut rate);
            for (xi, r) in x.iter_mut().zip(&rate) {
                *xi += dt * r;
            }
        }
        if year < FIRST_YEAR {
            continue;
        }
        let mut expected = vec![0.0; model.obs_dim()];
        model.measure(&x, t0 + 1.0, &mut expected);
        let mut batch = ObservationBatch::new(year);
        let mut total = Poisson::new(3.0).expect("finite mean").sample(&mut rng) as u64;
        for (slot, e) in batch.deaths.iter_mut().zip(&expected) {
            let lambda = e * model.obs_scale();
            let draw = if lambda > 0.0 {
                Poisson::new(lambda).expect("finite mean").sample(&mut rng) as u64
            } else {
                0
            };
            total += draw;
            *slot = (!(1..=9).contains(&draw)).then_some(draw);
        }
        batch.reported_total = Some(total);
        eprintln!("{year}: {} deaths", batch.reported_total.unwrap_or(0));
        batches.push(batch);
    }

    let notes = [
        "SYNTHETIC DATA generated by the synth_data example; not real CDC WONDER output.",
        "Layout mirrors a WONDER export grouped by Year and Five-Year Age Groups.",
        "Counts between 1 and 9 are shown as Suppressed.",
    ];
    let wonder_dir = out.join("synthetic-wonder");
    let canonical_dir = out.join("synthetic-canonical");
    fs::create_dir_all(&wonder_dir).expect("create output directory");
    fs::create_dir_all(&canonical_dir).expect("create output directory");
    fs::write(wonder_dir.join("overdose_1999_2020.txt"), write_wonder(&batches, &notes)).expect("write fixture");
    let file = fs::File::create(canonical_dir.join("overdose_1999_2020.csv")).expect("create fixture");
    write_canonical(&batches, file).expect("write fixture");

    let pop = settings.population;
    let mut csv = String::from("year,population\n");
    for year in 1999..=LAST_YEAR {
        csv.push_str(&format!("{year},{:.0}\n", pop.at((year - 1998) as f64)));
    }
    fs::write(out.join("synthetic-population.csv"), csv).expect("write population");
}
