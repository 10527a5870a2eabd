//! Frames, clips, the binary formats they travel in, and run configuration.

mod config;
mod image;
pub mod ppm;
pub mod tensor;
mod video;

pub use config::{load_config, parse_config, Config};
pub use image::{Image, VideoClip};
pub use tensor::{decode_tensor, encode_tensor, DType, TensorData, TensorFile};
pub use ppm::{decode_ppm, encode_ppm};
pub use video::{frame_file_name, load_video, save_frames};
