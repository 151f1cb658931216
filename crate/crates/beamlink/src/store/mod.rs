//! File-backed columnar beam store.
//!
//! A store is a directory: a plain-text manifest naming platforms, sensors,
//! campaigns and packages, plus one binary column file per package. Beams
//! are partitioned per `(campaign, sensor)` in timestamp order into
//! uniformly sized packages, each carrying an axis-aligned envelope over
//! its beam origins and reflection points for spatial pruning. Association
//! columns live beside the beam columns and can be filled in later without
//! touching the measured values.
//!
//! Writes follow a write-new-then-rename discipline: neither the manifest
//! nor a package file is ever modified in place, so a crash leaves every
//! previously committed file intact. A single writer is enforced through
//! an advisory lock file; readers never block (and never look at the
//! lock). A stale lock left by a killed process must be removed by hand.

mod codec;
mod manifest;
mod scene;
mod text;

pub use scene::{read_scene, write_scene};
pub use text::{read_beam_csv, write_beam_csv, BeamTable};

use crate::association::{Association, Beam, EnrichedBeam, PointEnrichment};
use crate::geom::Aabb;
use crate::geom::RigidTransform;
use crate::ids::{BeamId, CampaignId, ObjectId, SensorId, SurfaceId};
use crate::index::SurfaceIndex;
use manifest::ManifestData;
use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use thiserror::Error;

/// Name of the plain-text manifest inside a store directory.
pub const MANIFEST_FILE: &str = "manifest.txt";
const LOCK_FILE: &str = ".lock";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("store is locked by another writer; remove {0} if it is stale")]
    Busy(PathBuf),
    #[error("store was opened read-only")]
    ReadOnly,
    #[error("{0} exists and is not an empty directory")]
    NotEmpty(PathBuf),
    #[error("{0} is not a store: missing manifest")]
    NotAStore(PathBuf),
    #[error("unknown platform {0:?}")]
    UnknownPlatform(String),
    #[error("unknown sensor {0}")]
    UnknownSensor(SensorId),
    #[error("unknown campaign {0}")]
    UnknownCampaign(CampaignId),
    #[error("unknown surface {0}")]
    UnknownSurface(SurfaceId),
    #[error("unknown package {0:?}")]
    UnknownPackage(String),
    #[error("beam {0} is not stored")]
    UnknownBeam(BeamId),
    #[error("duplicate {0}")]
    DuplicateEntity(String),
    #[error("beam id {0} is already stored")]
    DuplicateBeam(BeamId),
    #[error("beam {beam_id}: {reason}")]
    InvalidBeam { beam_id: u64, reason: String },
    #[error("{0}")]
    InvalidParams(String),
    #[error("{file}: {reason}")]
    Corrupt { file: String, reason: String },
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
}

/// Append-only string table shared by all packages of a store. Packages
/// refer to strings by index; the manifest persists the table.
#[derive(Default)]
pub(crate) struct Interner {
    strings: Vec<String>,
    index: BTreeMap<String, u32>,
}

impl Interner {
    fn intern(&mut self, s: &str) -> u32 {
        if let Some(&i) = self.index.get(s) {
            return i;
        }
        debug_assert!(
            !s.contains(['\t', '\n', '\r']),
            "interned strings are validated upstream"
        );
        let i = self.strings.len() as u32;
        self.strings.push(s.to_owned());
        self.index.insert(s.to_owned(), i);
        i
    }

    fn get(&self, id: u32) -> Option<&str> {
        self.strings.get(id as usize).map(String::as_str)
    }

    fn len(&self) -> usize {
        self.strings.len()
    }

    fn strings(&self) -> &[String] {
        &self.strings
    }
}

/// Carrier vehicle or aircraft that sensors are mounted on.
#[derive(Clone, Debug, PartialEq)]
pub struct Platform {
    pub id: String,
    pub name: String,
}

/// A registered scanner and its mounting pose on the platform. The mount
/// maps beam coordinates from the sensor frame into the world frame at
/// ingest time.
#[derive(Clone, Debug, PartialEq)]
pub struct Sensor {
    pub id: SensorId,
    pub platform_id: String,
    pub model: String,
    pub mount: RigidTransform,
}

/// One recording drive/flight of a platform.
#[derive(Clone, Debug, PartialEq)]
pub struct Campaign {
    pub id: CampaignId,
    pub platform_id: String,
    pub start_time_ns: i64,
    pub description: String,
    pub environment: String,
}

/// Metadata of one stored package file.
#[derive(Clone, Debug, PartialEq)]
pub struct PackageMeta {
    pub id: String,
    pub campaign_id: CampaignId,
    pub sensor_id: SensorId,
    pub file: String,
    pub beam_count: u64,
    /// Exact file size; verified before decoding.
    pub bytes: u64,
    /// Covers every member beam's origin and reflection point.
    pub envelope: Aabb,
}

/// Association columns of a stored beam. All-present or all-absent as a
/// block; the object's function tag is scene metadata and is re-joined
/// from the scene file when needed (see [`BeamRecord::into_enriched`]).
#[derive(Clone, Debug, PartialEq)]
pub struct AssocColumns {
    pub surface_id: SurfaceId,
    pub object_id: ObjectId,
    pub class_name: String,
    pub zenith: f64,
    pub azimuth: f64,
    pub signed_dist: f64,
    pub min_dist: f64,
}

/// A beam as stored: measurement columns plus optional association block.
#[derive(Clone, Debug, PartialEq)]
pub struct BeamRecord {
    pub beam: Beam,
    pub assoc: Option<AssocColumns>,
}

impl BeamRecord {
    pub fn unassociated(beam: Beam) -> Self {
        Self { beam, assoc: None }
    }

    /// Rebuilds the in-memory enriched form, supplying the function tag of
    /// the linked surface (usually looked up in the scene file).
    pub fn into_enriched<F>(self, function_of: F) -> EnrichedBeam
    where
        F: FnOnce(&SurfaceId) -> Option<String>,
    {
        let enrichment = self.assoc.map(|a| {
            let function = function_of(&a.surface_id);
            PointEnrichment {
                surface_id: a.surface_id,
                object_id: a.object_id,
                class_name: a.class_name,
                function,
                zenith: a.zenith,
                azimuth: a.azimuth,
                signed_dist: a.signed_dist,
                min_dist: a.min_dist,
            }
        });
        EnrichedBeam { beam: self.beam, enrichment }
    }
}

impl From<EnrichedBeam> for BeamRecord {
    /// Drops the function tag: it belongs to the scene, not the store.
    fn from(e: EnrichedBeam) -> Self {
        let assoc = e.enrichment.map(|p| AssocColumns {
            surface_id: p.surface_id,
            object_id: p.object_id,
            class_name: p.class_name,
            zenith: p.zenith,
            azimuth: p.azimuth,
            signed_dist: p.signed_dist,
            min_dist: p.min_dist,
        });
        BeamRecord { beam: e.beam, assoc }
    }
}

fn tab_safe(s: &str) -> bool {
    !s.contains(['\t', '\n', '\r'])
}

/// Handle on a store directory.
pub struct Store {
    root: PathBuf,
    writable: bool,
    data: ManifestData,
    next_package: u64,
}

impl Store {
    /// Initializes a fresh store in `root`, which must not exist yet or be
    /// an empty directory. The returned handle holds the writer lock.
    pub fn create(root: &Path) -> Result<Store, StoreError> {
        if root.exists() {
            if !root.is_dir() || root.read_dir()?.next().is_some() {
                return Err(StoreError::NotEmpty(root.to_owned()));
            }
        } else {
            std::fs::create_dir_all(root)?;
        }
        acquire_lock(root)?;
        let store = Store {
            root: root.to_owned(),
            writable: true,
            data: ManifestData::default(),
            next_package: 1,
        };
        store.persist_manifest()?;
        Ok(store)
    }

    /// Opens an existing store for writing; fails with [`StoreError::Busy`]
    /// while another writer holds the lock.
    pub fn open_rw(root: &Path) -> Result<Store, StoreError> {
        acquire_lock(root)?;
        match Self::load(root, true) {
            Ok(store) => Ok(store),
            Err(e) => {
                let _ = std::fs::remove_file(root.join(LOCK_FILE));
                Err(e)
            }
        }
    }

    /// Opens an existing store for reading. Never blocks on (or takes)
    /// the writer lock.
    pub fn open_ro(root: &Path) -> Result<Store, StoreError> {
        Self::load(root, false)
    }

    fn load(root: &Path, writable: bool) -> Result<Store, StoreError> {
        let text = match std::fs::read_to_string(root.join(MANIFEST_FILE)) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(StoreError::NotAStore(root.to_owned()))
            }
            Err(e) => return Err(e.into()),
        };
        let data = manifest::parse(&text)?;
        let next_package = data
            .packages
            .iter()
            .filter_map(|p| p.id.strip_prefix("pkg-").and_then(|n| n.parse::<u64>().ok()))
            .max()
            .map_or(1, |m| m + 1);
        Ok(Store { root: root.to_owned(), writable, data, next_package })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn platforms(&self) -> impl Iterator<Item = &Platform> {
        self.data.platforms.values()
    }

    pub fn sensors(&self) -> impl Iterator<Item = &Sensor> {
        self.data.sensors.values()
    }

    pub fn campaigns(&self) -> impl Iterator<Item = &Campaign> {
        self.data.campaigns.values()
    }

    pub fn packages(&self) -> &[PackageMeta] {
        &self.data.packages
    }

    pub fn sensor(&self, id: &SensorId) -> Option<&Sensor> {
        self.data.sensors.get(id)
    }

    pub fn campaign(&self, id: &CampaignId) -> Option<&Campaign> {
        self.data.campaigns.get(id)
    }

    fn require_writable(&self) -> Result<(), StoreError> {
        if self.writable {
            Ok(())
        } else {
            Err(StoreError::ReadOnly)
        }
    }

    /// Serializes the manifest to a sibling temp file and renames it over
    /// the live one, so readers only ever see complete manifests.
    fn persist_manifest(&self) -> Result<(), StoreError> {
        let tmp = self.root.join(format!("{MANIFEST_FILE}.tmp"));
        std::fs::write(&tmp, manifest::render(&self.data))?;
        std::fs::rename(&tmp, self.root.join(MANIFEST_FILE))?;
        Ok(())
    }

    fn write_package_file(&self, file: &str, bytes: &[u8]) -> Result<(), StoreError> {
        let tmp = self.root.join(format!("{file}.tmp"));
        std::fs::write(&tmp, bytes)?;
        std::fs::rename(&tmp, self.root.join(file))?;
        Ok(())
    }

    pub fn add_platform(&mut self, platform: Platform) -> Result<(), StoreError> {
        self.require_writable()?;
        if !crate::ids::is_clean_token(&platform.id) || !tab_safe(&platform.name) {
            return Err(StoreError::InvalidParams(
                "platform id must be a separator-free token and the name tab-free".to_owned(),
            ));
        }
        if self.data.platforms.contains_key(&platform.id) {
            return Err(StoreError::DuplicateEntity(format!("platform {:?}", platform.id)));
        }
        self.data.platforms.insert(platform.id.clone(), platform);
        self.persist_manifest()
    }

    pub fn add_sensor(&mut self, sensor: Sensor) -> Result<(), StoreError> {
        self.require_writable()?;
        if !crate::ids::is_clean_token(sensor.id.as_str()) || !tab_safe(&sensor.model) {
            return Err(StoreError::InvalidParams(
                "sensor id must be a separator-free token and the model tab-free".to_owned(),
            ));
        }
        if !self.data.platforms.contains_key(&sensor.platform_id) {
            return Err(StoreError::UnknownPlatform(sensor.platform_id.clone()));
        }
        if sensor.mount.validate(1e-6).is_err() {
            return Err(StoreError::InvalidParams("sensor mount pose is not rigid".to_owned()));
        }
        if self.data.sensors.contains_key(&sensor.id) {
            return Err(StoreError::DuplicateEntity(format!("sensor {}", sensor.id)));
        }
        self.data.sensors.insert(sensor.id.clone(), sensor);
        self.persist_manifest()
    }

    pub fn add_campaign(&mut self, campaign: Campaign) -> Result<(), StoreError> {
        self.require_writable()?;
        if !crate::ids::is_clean_token(campaign.id.as_str())
            || !tab_safe(&campaign.description)
            || !tab_safe(&campaign.environment)
        {
            return Err(StoreError::InvalidParams(
                "campaign id must be a separator-free token and text fields tab-free".to_owned(),
            ));
        }
        if !self.data.platforms.contains_key(&campaign.platform_id) {
            return Err(StoreError::UnknownPlatform(campaign.platform_id.clone()));
        }
        if self.data.campaigns.contains_key(&campaign.id) {
            return Err(StoreError::DuplicateEntity(format!("campaign {}", campaign.id)));
        }
        self.data.campaigns.insert(campaign.id.clone(), campaign);
        self.persist_manifest()
    }

    /// Every beam id currently stored, gathered from the package files.
    fn stored_beam_ids(&self) -> Result<BTreeSet<u64>, StoreError> {
        let mut ids = BTreeSet::new();
        for meta in &self.data.packages {
            for id in self.package_beam_ids(meta)? {
                ids.insert(id);
            }
        }
        Ok(ids)
    }

    fn read_package_bytes(&self, meta: &PackageMeta) -> Result<Vec<u8>, StoreError> {
        let bytes = std::fs::read(self.root.join(&meta.file))?;
        if bytes.len() as u64 != meta.bytes {
            return Err(StoreError::Corrupt {
                file: meta.file.clone(),
                reason: format!(
                    "file holds {} bytes but the manifest records {}",
                    bytes.len(),
                    meta.bytes
                ),
            });
        }
        Ok(bytes)
    }

    fn package_beam_ids(&self, meta: &PackageMeta) -> Result<Vec<u64>, StoreError> {
        codec::decode_beam_ids(&self.read_package_bytes(meta)?, &meta.file)
    }

    /// Validates, transforms into the world frame via the sensor mount,
    /// partitions per `(campaign, sensor)` in `(timestamp, beam id)` order
    /// into chunks of `package_size`, and writes one package per chunk.
    /// Returns the new package ids. Beam ids must be new to the store:
    /// associations address beams by id alone, so ids stay unique
    /// store-wide.
    pub fn ingest(
        &mut self,
        beams: &[Beam],
        package_size: usize,
    ) -> Result<Vec<String>, StoreError> {
        self.require_writable()?;
        if package_size == 0 {
            return Err(StoreError::InvalidParams("package size must be at least 1".to_owned()));
        }
        if beams.is_empty() {
            return Ok(Vec::new());
        }

        let existing = self.stored_beam_ids()?;
        let mut batch = BTreeSet::new();
        for beam in beams {
            beam.validate().map_err(|reason| StoreError::InvalidBeam {
                beam_id: beam.beam_id.0,
                reason,
            })?;
            if !self.data.sensors.contains_key(&beam.sensor_id) {
                return Err(StoreError::UnknownSensor(beam.sensor_id.clone()));
            }
            if !self.data.campaigns.contains_key(&beam.campaign_id) {
                return Err(StoreError::UnknownCampaign(beam.campaign_id.clone()));
            }
            if existing.contains(&beam.beam_id.0) || !batch.insert(beam.beam_id.0) {
                return Err(StoreError::DuplicateBeam(beam.beam_id));
            }
        }

        let mut groups: BTreeMap<(CampaignId, SensorId), Vec<Beam>> = BTreeMap::new();
        for beam in beams {
            let mount = &self.data.sensors[&beam.sensor_id].mount;
            let world = Beam {
                origin: mount.apply(beam.origin),
                direction: mount.apply_direction(beam.direction),
                ..beam.clone()
            };
            groups
                .entry((beam.campaign_id.clone(), beam.sensor_id.clone()))
                .or_default()
                .push(world);
        }

        let mut new_ids = Vec::new();
        for ((campaign_id, sensor_id), mut group) in groups {
            group.sort_by_key(|b| (b.timestamp_ns, b.beam_id.0));
            let mut rest = group.as_slice();
            while !rest.is_empty() {
                let take = rest.len().min(package_size);
                let (chunk, tail) = rest.split_at(take);
                rest = tail;

                let envelope = Aabb::from_points(
                    chunk.iter().flat_map(|b| [b.origin, b.reflection_point()]),
                )
                .expect("chunks are non-empty");
                let records: Vec<BeamRecord> =
                    chunk.iter().map(|b| BeamRecord::unassociated(b.clone())).collect();
                let bytes = codec::encode(&records, &mut self.data.interner);

                let id = format!("pkg-{:06}", self.next_package);
                self.next_package += 1;
                let file = format!("{id}.bin");
                self.write_package_file(&file, &bytes)?;
                self.data.packages.push(PackageMeta {
                    id: id.clone(),
                    campaign_id: campaign_id.clone(),
                    sensor_id: sensor_id.clone(),
                    file,
                    beam_count: chunk.len() as u64,
                    bytes: bytes.len() as u64,
                    envelope,
                });
                new_ids.push(id);
            }
        }
        // Package files are committed before the manifest references them;
        // a crash in between leaves only unreferenced files behind.
        self.persist_manifest()?;
        Ok(new_ids)
    }

    /// Ids of the packages whose envelope intersects `query` (touching
    /// counts), in manifest order.
    pub fn query_by_envelope(&self, query: &Aabb) -> Vec<String> {
        self.data
            .packages
            .iter()
            .filter(|p| p.envelope.intersects(query))
            .map(|p| p.id.clone())
            .collect()
    }

    /// Reads whole packages by id, concatenated in the order given.
    pub fn read_beams(&self, package_ids: &[String]) -> Result<Vec<BeamRecord>, StoreError> {
        let mut out = Vec::new();
        for id in package_ids {
            let meta = self
                .data
                .packages
                .iter()
                .find(|p| &p.id == id)
                .ok_or_else(|| StoreError::UnknownPackage(id.clone()))?;
            let bytes = self.read_package_bytes(meta)?;
            out.extend(codec::decode(&bytes, &self.data.interner, &meta.file)?);
        }
        Ok(out)
    }

    /// Reads every package in manifest order.
    pub fn read_all_beams(&self) -> Result<Vec<BeamRecord>, StoreError> {
        let ids: Vec<String> = self.data.packages.iter().map(|p| p.id.clone()).collect();
        self.read_beams(&ids)
    }

    /// Fills the association columns of already-stored beams from
    /// confirmed rank-1 associations. The class name is taken from the
    /// associated surface in `index`. Validation happens up front; the
    /// affected packages are then rewritten one by one (each atomically),
    /// and measured beam columns are never touched. Returns the number of
    /// updated records.
    pub fn update_associations(
        &mut self,
        associations: &[Association],
        index: &SurfaceIndex,
    ) -> Result<u64, StoreError> {
        self.require_writable()?;
        let mut pending: BTreeMap<u64, AssocColumns> = BTreeMap::new();
        for a in associations.iter().filter(|a| a.rank == 1) {
            let surface = index
                .get(&a.surface_id)
                .ok_or_else(|| StoreError::UnknownSurface(a.surface_id.clone()))?;
            if surface.object_id != a.object_id {
                return Err(StoreError::InvalidParams(format!(
                    "association of beam {} names object {} but surface {} belongs to {}",
                    a.beam_id, a.object_id, a.surface_id, surface.object_id
                )));
            }
            let columns = AssocColumns {
                surface_id: a.surface_id.clone(),
                object_id: a.object_id.clone(),
                class_name: surface.class_name.clone(),
                zenith: a.zenith,
                azimuth: a.azimuth,
                signed_dist: a.signed_dist,
                min_dist: a.min_dist,
            };
            if pending.insert(a.beam_id.0, columns).is_some() {
                return Err(StoreError::InvalidParams(format!(
                    "beam {} carries two rank-1 associations",
                    a.beam_id
                )));
            }
        }
        if pending.is_empty() {
            return Ok(0);
        }

        // Locate the target package of every beam id before mutating
        // anything, so unknown beams abort with the store untouched.
        let mut touched: Vec<(usize, Vec<u64>)> = Vec::new();
        let mut found: BTreeSet<u64> = BTreeSet::new();
        for (pi, meta) in self.data.packages.iter().enumerate() {
            let hits: Vec<u64> = self
                .package_beam_ids(meta)?
                .into_iter()
                .filter(|id| pending.contains_key(id))
                .collect();
            if !hits.is_empty() {
                found.extend(hits.iter().copied());
                touched.push((pi, hits));
            }
        }
        if let Some(missing) = pending.keys().find(|id| !found.contains(id)) {
            return Err(StoreError::UnknownBeam(BeamId(*missing)));
        }

        // Commit any new interned strings to the manifest before the
        // packages that will reference them.
        for columns in pending.values() {
            self.data.interner.intern(columns.surface_id.as_str());
            self.data.interner.intern(columns.object_id.as_str());
            self.data.interner.intern(columns.class_name.as_str());
        }
        self.persist_manifest()?;

        for (pi, hits) in touched {
            let meta = &self.data.packages[pi];
            let bytes = self.read_package_bytes(meta)?;
            let mut records = codec::decode(&bytes, &self.data.interner, &meta.file)?;
            for record in &mut records {
                if let Some(columns) = pending.get(&record.beam.beam_id.0) {
                    record.assoc = Some(columns.clone());
                }
            }
            let file = meta.file.clone();
            let expected = meta.bytes;
            let new_bytes = codec::encode(&records, &mut self.data.interner);
            debug_assert_eq!(new_bytes.len() as u64, expected, "records are fixed-size");
            self.write_package_file(&file, &new_bytes)?;
            let _ = hits;
        }
        Ok(pending.len() as u64)
    }
}

impl Drop for Store {
    fn drop(&mut self) {
        if self.writable {
            let _ = std::fs::remove_file(self.root.join(LOCK_FILE));
        }
    }
}

fn acquire_lock(root: &Path) -> Result<(), StoreError> {
    let path = root.join(LOCK_FILE);
    match std::fs::OpenOptions::new().write(true).create_new(true).open(&path) {
        Ok(_) => Ok(()),
        Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(StoreError::Busy(path)),
        Err(e) => Err(e.into()),
    }
}
