use super::scene::ObjectSpec;

pub const BACKGROUND: [u8; 3] = [48, 48, 48];

/// Color tags resolvable to fixed RGB values.
pub const PALETTE: &[(&str, [u8; 3])] = &[
    ("red", [200, 30, 30]),
    ("green", [40, 170, 60]),
    ("blue", [40, 70, 200]),
    ("yellow", [230, 200, 40]),
    ("orange", [240, 130, 20]),
    ("purple", [130, 50, 170]),
    ("white", [235, 235, 235]),
    ("black", [15, 15, 15]),
    ("pink", [240, 120, 170]),
    ("wooden", [150, 100, 55]),
];

const UNTAGGED: [u8; 3] = [160, 160, 160];

pub fn tag_color(tag: &str) -> Option<[u8; 3]> {
    let tag = tag.to_lowercase();
    PALETTE.iter().find(|(name, _)| *name == tag).map(|(_, c)| *c)
}

/// Flat color for a part: the object's first color tag, darkened slightly per part index
/// so parts stay distinguishable in the image.
pub fn object_color(object: &ObjectSpec, part: usize) -> [u8; 3] {
    let base = object.tags.iter().find_map(|t| tag_color(t)).unwrap_or(UNTAGGED);
    let scale = 1.0 - 0.12 * (part % 4) as f64;
    base.map(|c| (f64::from(c) * scale).round() as u8)
}
