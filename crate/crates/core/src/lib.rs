//! Hand-pose data augmentation toolkit.
//!
//! The crate covers the whole flow from a bank of synthetic hand poses to
//! scored training composites:
//!
//! * [`pose`]: 21-keypoint poses and the pairwise-difference feature.
//! * [`align`]: least-squares affine fitting, the aligned cosine kernel and
//!   exhaustive retrieval.
//! * [`pq`]: product-quantization index with asymmetric distance search and
//!   exact re-ranking.
//! * [`image`]: images, blur/edge conditioning maps, color histograms and
//!   compositing with keypoint re-annotation.
//! * [`loss`]: L1 shape distance, KL color distance, weighted tonality
//!   alignment loss and the adversarial objective value.
//! * [`toy`]: a desk-scale conditional adversarial trainer with hand-written
//!   backpropagation.
//! * [`metrics`]: EPE, PCK, AUC and dataset root conventions.
//! * [`synth`]: procedural hand-pose generation for seeded banks.

pub mod align;
pub mod image;
pub mod loss;
pub mod metrics;
pub mod pose;
pub mod pq;
pub mod synth;
pub mod toy;

pub use align::{fit_affine, retrieve_exact, similarity, Affine2D, AlignError, Match};
pub use image::{ColorHistogram, CompositeJob, Image, ImageError};
pub use loss::{LossError, LossReport, LossWeights};
pub use metrics::{MetricsError, PckCurve, PredictionSet, Space};
pub use pose::{HandPose, PoseError, PoseFeature, FEATURE_DIM, NUM_KEYPOINTS};
pub use pq::{PqError, PqIndex, SearchParams};
