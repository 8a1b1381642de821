//! Binaural audio synthesis and recurrent Q-learning for head-orientation
//! control: a talker is spatialized on an angular grid, and an agent hears
//! 500 ms stereo windows and learns to rotate its head onto the talker.

// DSP inner loops index several buffers at once; iterator rewrites obscure them.
#![allow(clippy::needless_range_loop)]

pub mod audio;
pub mod corpus;
pub mod env;
pub mod harness;
pub mod learner;
