//! Horizontal / vertical affinity fields.
//!
//! [`encode_affinities`] turns a lane-instance mask into ground-truth fields:
//! every lane pixel's HAF points toward its lane's centre in the same row and
//! its VAF is the unit vector toward the lane's centre in the row above.
//! [`decode`] inverts this on predicted maps: rows are scanned bottom to top,
//! each row's foreground is split into clusters where the HAF sign flips from
//! non-positive to positive, and clusters are linked to the lanes below them by
//! how well each lane pixel's VAF points at the cluster centroid.

mod agreement;
mod decode;
mod encode;
mod mask;

pub use agreement::lane_identity_agreement;
pub use decode::{
    associate_clusters_vaf, association_error, cluster_row_haf, decode, ActiveLane, Assignment,
    Cluster, DecodeConfig, DecodedLane, DecodedLanes,
};
pub use encode::{encode_affinities, lane_centers, AffinityPair};
pub use mask::LaneMask;
