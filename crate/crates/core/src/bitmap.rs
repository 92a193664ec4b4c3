use bitvec::prelude::*;

/// One bit per 16-byte slot of a region. Used for both mark maps and
/// activity maps, so the two always share geometry.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SlotBitmap {
    bits: BitVec<u64, Lsb0>,
}

impl SlotBitmap {
    pub fn new(slots: usize) -> Self {
        SlotBitmap {
            bits: bitvec![u64, Lsb0; 0; slots],
        }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn get(&self, slot: usize) -> bool {
        self.bits.get(slot).map(|b| *b).unwrap_or(false)
    }

    /// Sets the bit and returns its previous value.
    pub fn set(&mut self, slot: usize) -> bool {
        let prev = self.bits[slot];
        self.bits.set(slot, true);
        prev
    }

    pub fn clear(&mut self, slot: usize) {
        self.bits.set(slot, false);
    }

    pub fn clear_all(&mut self) {
        self.bits.fill(false);
    }

    pub fn count_ones(&self) -> usize {
        self.bits.count_ones()
    }

    pub fn iter_ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.iter_ones()
    }

    /// `self & !other`, computed word at a time.
    pub fn difference(&self, other: &SlotBitmap) -> SlotBitmap {
        assert_eq!(self.len(), other.len(), "bitmap geometry mismatch");
        let words: Vec<u64> = self
            .bits
            .as_raw_slice()
            .iter()
            .zip(other.bits.as_raw_slice())
            .map(|(a, b)| a & !b)
            .collect();
        let mut bits = BitVec::<u64, Lsb0>::from_vec(words);
        bits.truncate(self.len());
        SlotBitmap { bits }
    }

    pub fn is_subset_of(&self, other: &SlotBitmap) -> bool {
        self.len() == other.len()
            && self
                .bits
                .as_raw_slice()
                .iter()
                .zip(other.bits.as_raw_slice())
                .all(|(a, b)| a & !b == 0)
    }
}
