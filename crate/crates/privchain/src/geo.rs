//! WGS84 → UTM → 10 m grid cells, and named rectangular regions over cells.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// WGS84 semi-major axis, metres.
const WGS84_A: f64 = 6_378_137.0;
/// WGS84 flattening.
const WGS84_F: f64 = 1.0 / 298.257_223_563;
const K0: f64 = 0.9996;
const FALSE_EASTING: f64 = 500_000.0;
const FALSE_NORTHING_SOUTH: f64 = 10_000_000.0;
pub const CELL_METRES: f64 = 10.0;

/// Grid index bounds that keep a rectangle inside one zone's valid easting band.
const E10_MIN: i64 = 10_000;
const E10_MAX: i64 = 90_000;
const N10_MAX: i64 = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeoError {
    #[error("coordinate ({lat}, {lon}) outside UTM coverage")]
    OutOfUtmBounds { lat: f64, lon: f64 },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("region `{0}` has lo > hi")]
    InvertedBounds(String),
    #[error("region `{0}` spans more than one UTM zone")]
    SpansZones(String),
    #[error("duplicate region name `{0}`")]
    DuplicateName(String),
    #[error("region `{0}` repeats the bounds of `{1}`")]
    DuplicateBounds(String, String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Hemisphere {
    North,
    South,
}

impl Hemisphere {
    pub fn code(&self) -> u8 {
        match self {
            Hemisphere::North => b'N',
            Hemisphere::South => b'S',
        }
    }

    pub fn from_code(c: u8) -> Option<Self> {
        match c {
            b'N' => Some(Hemisphere::North),
            b'S' => Some(Hemisphere::South),
            _ => None,
        }
    }
}

impl fmt::Display for Hemisphere {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.code() as char)
    }
}

impl FromStr for Hemisphere {
    type Err = ();
    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "N" | "n" => Ok(Hemisphere::North),
            "S" | "s" => Ok(Hemisphere::South),
            _ => Err(()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeoCoord {
    pub latitude: f64,
    pub longitude: f64,
}

impl GeoCoord {
    pub fn new(latitude: f64, longitude: f64) -> Self {
        GeoCoord { latitude, longitude }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UtmCoord {
    pub zone: u8,
    pub hemisphere: Hemisphere,
    pub easting: f64,
    pub northing: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct GridIndex {
    pub zone: u8,
    pub hemisphere: Hemisphere,
    pub e10: i64,
    pub n10: i64,
}

impl GridIndex {
    /// The 10 m box `[e_min, e_max) × [n_min, n_max)` this cell covers.
    pub fn cell_box(&self) -> (f64, f64, f64, f64) {
        let e = self.e10 as f64 * CELL_METRES;
        let n = self.n10 as f64 * CELL_METRES;
        (e, e + CELL_METRES, n, n + CELL_METRES)
    }
}

pub fn utm_zone(longitude: f64) -> u8 {
    let z = ((longitude + 180.0) / 6.0).floor() as i64 + 1;
    z.clamp(1, 60) as u8
}

fn central_meridian(zone: u8) -> f64 {
    (zone as f64 - 1.0) * 6.0 - 180.0 + 3.0
}

/// Krüger series coefficients for the forward projection, through n^6.
fn kruger_alpha(n: f64) -> [f64; 6] {
    let n2 = n * n;
    let n3 = n2 * n;
    let n4 = n3 * n;
    let n5 = n4 * n;
    let n6 = n5 * n;
    [
        n / 2.0 - 2.0 * n2 / 3.0 + 5.0 * n3 / 16.0 + 41.0 * n4 / 180.0 - 127.0 * n5 / 288.0 + 7891.0 * n6 / 37800.0,
        13.0 * n2 / 48.0 - 3.0 * n3 / 5.0 + 557.0 * n4 / 1440.0 + 281.0 * n5 / 630.0 - 1_983_433.0 * n6 / 1_935_360.0,
        61.0 * n3 / 240.0 - 103.0 * n4 / 140.0 + 15061.0 * n5 / 26880.0 + 167_603.0 * n6 / 181_440.0,
        49561.0 * n4 / 161_280.0 - 179.0 * n5 / 168.0 + 6_601_661.0 * n6 / 7_257_600.0,
        34729.0 * n5 / 80640.0 - 3_418_889.0 * n6 / 1_995_840.0,
        212_378_941.0 * n6 / 319_334_400.0,
    ]
}

/// Transverse Mercator projection into the standard UTM zone of the point.
pub fn wgs84_to_utm(coord: GeoCoord) -> Result<UtmCoord, GeoError> {
    let GeoCoord {
        latitude: lat,
        longitude: lon,
    } = coord;
    if !(-80.0..=84.0).contains(&lat) || !(-180.0..180.0).contains(&lon) {
        return Err(GeoError::OutOfUtmBounds { lat, lon });
    }
    let zone = utm_zone(lon);
    let hemisphere = if lat < 0.0 {
        Hemisphere::South
    } else {
        Hemisphere::North
    };

    let n = WGS84_F / (2.0 - WGS84_F);
    let e = (WGS84_F * (2.0 - WGS84_F)).sqrt();
    let rect_radius = WGS84_A / (1.0 + n) * (1.0 + n * n / 4.0 + n.powi(4) / 64.0 + n.powi(6) / 256.0);

    let phi = lat.to_radians();
    let dlambda = (lon - central_meridian(zone)).to_radians();
    let sin_phi = phi.sin();
    let t = (sin_phi.atanh() - e * (e * sin_phi).atanh()).sinh();
    let xi_p = t.atan2(dlambda.cos());
    let eta_p = (dlambda.sin() / (1.0 + t * t).sqrt()).atanh();

    let mut xi = xi_p;
    let mut eta = eta_p;
    for (j, a) in kruger_alpha(n).iter().enumerate() {
        let k = 2.0 * (j as f64 + 1.0);
        xi += a * (k * xi_p).sin() * (k * eta_p).cosh();
        eta += a * (k * xi_p).cos() * (k * eta_p).sinh();
    }

    let easting = FALSE_EASTING + K0 * rect_radius * eta;
    let mut northing = K0 * rect_radius * xi;
    if hemisphere == Hemisphere::South {
        northing += FALSE_NORTHING_SOUTH;
    }
    Ok(UtmCoord {
        zone,
        hemisphere,
        easting,
        northing,
    })
}

pub fn utm_to_grid(utm: &UtmCoord) -> GridIndex {
    GridIndex {
        zone: utm.zone,
        hemisphere: utm.hemisphere,
        e10: (utm.easting / CELL_METRES).floor() as i64,
        n10: (utm.northing / CELL_METRES).floor() as i64,
    }
}

pub fn geo_to_grid(coord: GeoCoord) -> Result<GridIndex, GeoError> {
    wgs84_to_utm(coord).map(|u| utm_to_grid(&u))
}

/// Axis-aligned rectangle of grid cells inside one zone, bounds inclusive.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Region {
    pub name: String,
    pub zone: u8,
    pub hemisphere: Hemisphere,
    pub e10_lo: i64,
    pub e10_hi: i64,
    pub n10_lo: i64,
    pub n10_hi: i64,
}

/// Zone, hemisphere and the four inclusive bounds; the key regions are looked up by.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RegionBounds {
    pub zone: u8,
    pub hemisphere: Hemisphere,
    pub e10_lo: i64,
    pub e10_hi: i64,
    pub n10_lo: i64,
    pub n10_hi: i64,
}

impl Region {
    pub fn bounds(&self) -> RegionBounds {
        RegionBounds {
            zone: self.zone,
            hemisphere: self.hemisphere,
            e10_lo: self.e10_lo,
            e10_hi: self.e10_hi,
            n10_lo: self.n10_lo,
            n10_hi: self.n10_hi,
        }
    }

    pub fn from_bounds(name: &str, b: RegionBounds) -> Self {
        Region {
            name: name.to_string(),
            zone: b.zone,
            hemisphere: b.hemisphere,
            e10_lo: b.e10_lo,
            e10_hi: b.e10_hi,
            n10_lo: b.n10_lo,
            n10_hi: b.n10_hi,
        }
    }

    pub fn contains(&self, idx: &GridIndex) -> bool {
        region_contains(self, idx)
    }

    fn validate(&self) -> Result<(), GeoError> {
        if self.e10_lo > self.e10_hi || self.n10_lo > self.n10_hi {
            return Err(GeoError::InvertedBounds(self.name.clone()));
        }
        if !(1..=60).contains(&self.zone)
            || self.e10_lo < E10_MIN
            || self.e10_hi >= E10_MAX
            || self.n10_lo < 0
            || self.n10_hi >= N10_MAX
        {
            return Err(GeoError::SpansZones(self.name.clone()));
        }
        Ok(())
    }
}

pub fn region_contains(region: &Region, idx: &GridIndex) -> bool {
    region.zone == idx.zone
        && region.hemisphere == idx.hemisphere
        && (region.e10_lo..=region.e10_hi).contains(&idx.e10)
        && (region.n10_lo..=region.n10_hi).contains(&idx.n10)
}

/// Named regions, unique by name and by bounds. Immutable once built.
///
/// File format, one region per line (`#` comments allowed):
///
/// ```text
/// # name      zone hemi e10_lo e10_hi n10_lo  n10_hi
/// Barossa     54   S    30100  30400  616000  616300
/// ```
#[derive(Clone, Debug, Default)]
pub struct RegionRegistry {
    regions: Vec<Region>,
    by_name: BTreeMap<String, usize>,
    by_bounds: BTreeMap<RegionBounds, usize>,
}

impl RegionRegistry {
    pub fn new(regions: Vec<Region>) -> Result<Self, GeoError> {
        let mut reg = RegionRegistry::default();
        for r in regions {
            reg.insert(r)?;
        }
        Ok(reg)
    }

    fn insert(&mut self, region: Region) -> Result<(), GeoError> {
        region.validate()?;
        if self.by_name.contains_key(&region.name) {
            return Err(GeoError::DuplicateName(region.name));
        }
        if let Some(&i) = self.by_bounds.get(&region.bounds()) {
            return Err(GeoError::DuplicateBounds(region.name, self.regions[i].name.clone()));
        }
        let i = self.regions.len();
        self.by_name.insert(region.name.clone(), i);
        self.by_bounds.insert(region.bounds(), i);
        self.regions.push(region);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Region> {
        self.by_name.get(name).map(|&i| &self.regions[i])
    }

    pub fn find_by_bounds(&self, bounds: &RegionBounds) -> Option<&Region> {
        self.by_bounds.get(bounds).map(|&i| &self.regions[i])
    }

    /// First region (in file order) containing the cell.
    pub fn locate(&self, idx: &GridIndex) -> Option<&Region> {
        self.regions.iter().find(|r| r.contains(idx))
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    pub fn parse(text: &str) -> Result<Self, GeoError> {
        let mut reg = RegionRegistry::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| GeoError::Parse { line: i + 1, msg };
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 7 {
                return Err(err(format!("expected 7 fields, found {}", f.len())));
            }
            if f[1].contains(['-', '+', ',']) {
                return Err(GeoError::SpansZones(f[0].to_string()));
            }
            let zone: u8 = f[1].parse().map_err(|_| err(format!("bad zone `{}`", f[1])))?;
            let hemisphere: Hemisphere = f[2].parse().map_err(|_| err(format!("bad hemisphere `{}`", f[2])))?;
            let mut b = [0i64; 4];
            for (slot, s) in b.iter_mut().zip(&f[3..]) {
                *slot = s.parse().map_err(|_| err(format!("bad bound `{s}`")))?;
            }
            reg.insert(Region {
                name: f[0].to_string(),
                zone,
                hemisphere,
                e10_lo: b[0],
                e10_hi: b[1],
                n10_lo: b[2],
                n10_hi: b[3],
            })
            .map_err(|e| match e {
                GeoError::Parse { .. } => e,
                other => err(other.to_string()),
            })?;
        }
        Ok(reg)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("# name zone hemisphere e10_lo e10_hi n10_lo n10_hi\n");
        for r in &self.regions {
            out.push_str(&format!(
                "{} {} {} {} {} {} {}\n",
                r.name, r.zone, r.hemisphere, r.e10_lo, r.e10_hi, r.n10_lo, r.n10_hi
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn region() -> Region {
        Region {
            name: "RegionA".into(),
            zone: 54,
            hemisphere: Hemisphere::South,
            e10_lo: 30100,
            e10_hi: 30400,
            n10_lo: 616000,
            n10_hi: 616300,
        }
    }

    #[test]
    fn central_meridian_on_equator() {
        let u = wgs84_to_utm(GeoCoord::new(0.0, 3.0)).unwrap();
        assert_eq!(u.zone, 31);
        assert_eq!(u.hemisphere, Hemisphere::North);
        assert!((u.easting - 500_000.0).abs() < 1e-6);
        assert!(u.northing.abs() < 1e-6);
    }

    #[test]
    fn zone_arithmetic() {
        assert_eq!(wgs84_to_utm(GeoCoord::new(0.0, -177.0)).unwrap().zone, 1);
        assert_eq!(utm_zone(-180.0), 1);
        assert_eq!(utm_zone(179.999), 60);
        for i in 0..360 {
            let lon = -180.0 + i as f64 + 0.5;
            assert_eq!(utm_zone(lon) as i64, (i / 6) + 1);
        }
    }

    #[test]
    fn polar_rejected() {
        assert!(wgs84_to_utm(GeoCoord::new(84.5, 0.0)).is_err());
        assert!(wgs84_to_utm(GeoCoord::new(-80.01, 0.0)).is_err());
        assert!(wgs84_to_utm(GeoCoord::new(10.0, 180.0)).is_err());
    }

    #[test]
    fn grid_flooring() {
        let mut u = UtmCoord {
            zone: 31,
            hemisphere: Hemisphere::North,
            easting: 500_004.9,
            northing: 12.0,
        };
        assert_eq!(utm_to_grid(&u).e10, 50_000);
        u.easting = 500_010.0;
        assert_eq!(utm_to_grid(&u).e10, 50_001);
        let (e0, e1, n0, n1) = utm_to_grid(&u).cell_box();
        assert!(e0 <= u.easting && u.easting < e1 && n0 <= u.northing && u.northing < n1);
    }

    #[test]
    fn containment_is_inclusive() {
        let r = region();
        let cell = |e10, n10| GridIndex {
            zone: 54,
            hemisphere: Hemisphere::South,
            e10,
            n10,
        };
        assert!(r.contains(&cell(30100, 616000)));
        assert!(r.contains(&cell(30400, 616300)));
        assert!(!r.contains(&cell(30401, 616000)));
        assert!(!r.contains(&cell(30100, 615999)));
        let mut other_zone = cell(30100, 616000);
        other_zone.zone = 55;
        assert!(!r.contains(&other_zone));
        let mut other_hemi = cell(30100, 616000);
        other_hemi.hemisphere = Hemisphere::North;
        assert!(!r.contains(&other_hemi));
    }

    #[test]
    fn registry_parse_and_lookup() {
        let text = "# regions\nRegionA 54 S 30100 30400 616000 616300\nRegionB 54 S 30500 30600 616000 616100\n";
        let reg = RegionRegistry::parse(text).unwrap();
        assert_eq!(reg.len(), 2);
        assert_eq!(reg.get("RegionA").unwrap(), &region());
        assert_eq!(reg.find_by_bounds(&region().bounds()).unwrap().name, "RegionA");
        let again = RegionRegistry::parse(&reg.to_text()).unwrap();
        assert_eq!(again.regions(), reg.regions());
    }

    #[test]
    fn registry_rejects_bad_records() {
        assert!(matches!(
            RegionRegistry::parse("A 54 S 5 4 0 1"),
            Err(GeoError::Parse { line: 1, .. })
        ));
        assert!(matches!(
            RegionRegistry::parse("A 54-55 S 30100 30400 616000 616300"),
            Err(GeoError::SpansZones(_))
        ));
        // easting band beyond the zone edge
        assert!(RegionRegistry::parse("A 54 S 5000 30400 616000 616300").is_err());
        let dup = "A 54 S 30100 30400 616000 616300\nA 54 S 30500 30600 616000 616100";
        assert!(RegionRegistry::parse(dup).is_err());
        let same = "A 54 S 30100 30400 616000 616300\nB 54 S 30100 30400 616000 616300";
        assert!(RegionRegistry::parse(same).is_err());
        assert!(RegionRegistry::parse("A 54 X 30100 30400 616000 616300").is_err());
    }

    #[test]
    fn easting_monotone_in_longitude() {
        let mut last = i64::MIN;
        for i in 0..600 {
            let lon = 132.0 + i as f64 * 0.01;
            let g = geo_to_grid(GeoCoord::new(-34.5, lon)).unwrap();
            assert!(g.e10 >= last);
            last = g.e10;
        }
    }
}
