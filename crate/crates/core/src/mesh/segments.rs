//! Box faces to boundary segment IDs.
//!
//! 2D rectangle: 1 bottom, 2 right, 3 top, 4 left.
//! 3D cuboid: 1 bottom (z-), 2 left (x-), 3 front (y-), 4 right (x+),
//! 5 back (y+), 6 top (z+).

/// `(axis, upper side)` per segment ID, index `id - 1`.
pub const SEGMENTS_2D: [(usize, bool); 4] = [(1, false), (0, true), (1, true), (0, false)];
pub const SEGMENTS_3D: [(usize, bool); 6] = [
    (2, false),
    (0, false),
    (1, false),
    (0, true),
    (1, true),
    (2, true),
];

pub fn segment_of_face(dim: usize, axis: usize, upper: bool) -> u8 {
    let table: &[(usize, bool)] = if dim == 2 { &SEGMENTS_2D } else { &SEGMENTS_3D };
    table
        .iter()
        .position(|&f| f == (axis, upper))
        .map(|p| p as u8 + 1)
        .expect("axis out of range for dimension")
}

pub fn face_of_segment(dim: usize, id: u8) -> Option<(usize, bool)> {
    let table: &[(usize, bool)] = if dim == 2 { &SEGMENTS_2D } else { &SEGMENTS_3D };
    table.get((id as usize).checked_sub(1)?).copied()
}

pub fn num_segments(dim: usize) -> u8 {
    if dim == 2 {
        4
    } else {
        6
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        for dim in [2, 3] {
            for id in 1..=num_segments(dim) {
                let (axis, up) = face_of_segment(dim, id).unwrap();
                assert_eq!(segment_of_face(dim, axis, up), id);
            }
            assert!(face_of_segment(dim, 0).is_none());
            assert!(face_of_segment(dim, num_segments(dim) + 1).is_none());
        }
    }
}
