use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;

/// The generator used throughout the simulator.
pub type SimRng = ChaCha8Rng;

/// Named purposes a master seed is split into.
///
/// Each purpose gets its own ChaCha key, and each index (trial, restart,
/// ...) its own stream within that key, so adding trials never shifts the
/// draws of earlier ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StreamTag {
    /// World draws and strategy draws of one game.
    World,
    /// Agent-item incidence.
    Assignment,
    /// Choice of gold or prejudice-anchored items handed to a mechanism.
    Mechanism,
    /// Initial profiles and ordering for best-response dynamics.
    Dynamics,
    /// Free-form tag for scenario-specific streams.
    Custom(u64),
}

impl StreamTag {
    fn code(self) -> u64 {
        match self {
            StreamTag::World => 1,
            StreamTag::Assignment => 2,
            StreamTag::Mechanism => 3,
            StreamTag::Dynamics => 4,
            StreamTag::Custom(x) => 0x8000_0000_0000_0000 | x,
        }
    }
}

/// Derives the independent stream `(master, tag, index)`.
pub fn substream(master: u64, tag: StreamTag, index: u64) -> SimRng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&master.to_le_bytes());
    key[8..16].copy_from_slice(&tag.code().to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(index);
    rng
}
