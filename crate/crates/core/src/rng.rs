//! Named random substreams.
//!
//! Every run is driven by one `u64` seed. Each consumer draws from its own
//! ChaCha stream so that, for example, the BP baseline initialisation and the
//! GA population initialisation of the same seed never share draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    PopulationInit,
    Operators,
    DataGen,
    BpInit,
}

impl Stream {
    fn id(self) -> u64 {
        match self {
            Stream::PopulationInit => 1,
            Stream::Operators => 2,
            Stream::DataGen => 3,
            Stream::BpInit => 4,
        }
    }
}

pub fn stream(seed: u64, which: Stream) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which.id());
    rng
}
