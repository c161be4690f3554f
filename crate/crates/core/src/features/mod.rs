//! Channel stacks, summed-area tables, patch descriptors and the patch distance.

mod channels;
mod color;
mod descriptor;
mod distance;
mod filters;
mod integral;

pub use channels::{compute_channel_stack, ChannelLayout, ChannelStack, TextureSource};
pub use color::{hsv_bin, rgb_to_hsv, COLOR_BINS, COLOR_CHANNELS};
pub use descriptor::{describe_patch, BoxSums, HistPart, PatchDescriptor};
pub use distance::{chi_square, patch_distance, DistanceParams, PyramidParams, CHI_SQUARE_EPS};
pub use filters::{luma, Filter, FilterBank};
pub use integral::IntegralStack;

pub(crate) use descriptor::describe_unchecked as descriptor_unchecked;
pub(crate) use distance::patch_distance_unchecked as distance_unchecked;
