//! Synthetic scenes with repeated textured objects, clutter and occlusion, plus a
//! simulated noisy base detector.

mod benchmark;
mod detector;
mod rng;
mod scene;
mod training;

pub use detector::{simulate_base_scores, NoiseConfig};
pub use rng::SynthRng;
pub use scene::{generate_scene, scene_id, CategoryStyle, Instance, Pattern, Scene, SynthConfig};
pub use training::{training_samples, TrainingSet};
pub use benchmark::{collect_training, run_benchmark, split_seeds, BenchmarkConfig, BenchmarkOutcome};
