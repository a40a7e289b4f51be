use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::model::SwitchInstance;

/// Purpose tags, placed in the high half of the ChaCha stream id.
const VERTEX_ARRIVAL: u64 = 1;
const DECOHERENCE: u64 = 2;
const EDGE_ARRIVAL: u64 = 3;
const SCHEDULE: u64 = 4;

/// Independent random streams, one per (entity, purpose).
///
/// Every stream is keyed by the run seed and a fixed stream id, so changing the
/// policy (which only touches the schedule stream) leaves arrival and
/// decoherence randomness untouched.
#[derive(Debug, Clone)]
pub struct SimStreams {
    pub vertex_arrival: Vec<ChaCha8Rng>,
    pub decoherence: Vec<ChaCha8Rng>,
    pub edge_arrival: Vec<ChaCha8Rng>,
    pub schedule: ChaCha8Rng,
}

pub fn stream(seed: u64, purpose: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((purpose << 32) | index);
    rng
}

impl SimStreams {
    pub fn new(seed: u64, g: &SwitchInstance) -> Self {
        let per = |purpose, n: usize| (0..n as u64).map(|i| stream(seed, purpose, i)).collect();
        SimStreams {
            vertex_arrival: per(VERTEX_ARRIVAL, g.num_vertices()),
            decoherence: per(DECOHERENCE, g.num_vertices()),
            edge_arrival: per(EDGE_ARRIVAL, g.num_edges()),
            schedule: stream(seed, SCHEDULE, 0),
        }
    }
}
