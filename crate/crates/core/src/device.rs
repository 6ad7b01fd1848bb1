//! Device manager: sensor agents stored in clusters labelled by a loaded
//! clustering program over registry `L`.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::time::Duration;

use serde::{Deserialize, Serialize};

use crate::adapter::SaId;
use crate::dsl::list::{ListRegistry, ListValue};
use crate::dsl::{evaluate, DslProgram, IoExample, ProgramError, RegistryId, SynthError, Synthesis, Synthesizer};

/// Cluster for agents the active program cannot label.
pub const UNCLASSIFIED: i64 = -1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SensorAgent {
    pub id: SaId,
    /// Element 0 is the device type, element 1 the device id, the rest are
    /// readings.
    pub attributes: Vec<i64>,
    pub resource_id: String,
    pub location: String,
    /// Milliseconds since the Unix epoch.
    pub last_active: u64,
}

/// One cluster as written to and read from the archive.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchivedCluster {
    pub cluster_id: i64,
    pub members: Vec<SensorAgent>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DeviceError {
    #[error("no clustering program loaded")]
    NoProgram,
    #[error("clustering programs must use registry L, not {0}")]
    WrongRegistry(RegistryId),
    #[error(transparent)]
    Program(#[from] ProgramError),
    #[error("sensor agent {0} has no attributes")]
    EmptyAttributes(SaId),
}

#[derive(Debug, Clone)]
pub struct DeviceManager {
    clusters: BTreeMap<i64, Vec<SensorAgent>>,
    placement: BTreeMap<SaId, i64>,
    program: Option<DslProgram>,
    synthesizer: Synthesizer,
    unclassified_inserts: u64,
}

impl Default for DeviceManager {
    fn default() -> Self {
        DeviceManager::new(Synthesizer::default())
    }
}

impl DeviceManager {
    pub fn new(synthesizer: Synthesizer) -> Self {
        DeviceManager {
            clusters: BTreeMap::new(),
            placement: BTreeMap::new(),
            program: None,
            synthesizer,
            unclassified_inserts: 0,
        }
    }

    pub fn program(&self) -> Option<&DslProgram> {
        self.program.as_ref()
    }

    pub fn synthesizer(&self) -> &Synthesizer {
        &self.synthesizer
    }

    /// Activates a program. Existing members keep their clusters.
    pub fn load_program(&mut self, program: DslProgram) -> Result<(), DeviceError> {
        if program.registry() != RegistryId::L {
            return Err(DeviceError::WrongRegistry(program.registry()));
        }
        self.program = Some(program);
        Ok(())
    }

    /// Parses and activates program text; on error the old program stays.
    pub fn load_program_text(&mut self, text: &str) -> Result<(), DeviceError> {
        let program = DslProgram::parse(text)?;
        self.load_program(program)
    }

    /// The label the active program gives an attribute vector.
    pub fn classify(&self, attributes: &[i64]) -> Result<i64, DeviceError> {
        let program = self.program.as_ref().ok_or(DeviceError::NoProgram)?;
        Ok(label(program, attributes))
    }

    /// Places an agent in the cluster named by the active program. An agent
    /// whose id is already stored is moved, never duplicated.
    pub fn insert(&mut self, sa: SensorAgent) -> Result<i64, DeviceError> {
        if sa.attributes.is_empty() {
            return Err(DeviceError::EmptyAttributes(sa.id));
        }
        let cluster = self.classify(&sa.attributes)?;
        if cluster == UNCLASSIFIED {
            self.unclassified_inserts += 1;
        }
        self.remove(sa.id);
        self.placement.insert(sa.id, cluster);
        self.clusters.entry(cluster).or_default().push(sa);
        Ok(cluster)
    }

    pub fn remove(&mut self, id: SaId) -> Option<SensorAgent> {
        let cluster = self.placement.remove(&id)?;
        let members = self.clusters.get_mut(&cluster)?;
        let pos = members.iter().position(|m| m.id == id)?;
        let sa = members.remove(pos);
        if members.is_empty() {
            self.clusters.remove(&cluster);
        }
        Some(sa)
    }

    pub fn lookup(&self, id: SaId) -> Option<(i64, &SensorAgent)> {
        let cluster = *self.placement.get(&id)?;
        let sa = self.clusters.get(&cluster)?.iter().find(|m| m.id == id)?;
        Some((cluster, sa))
    }

    pub fn touch(&mut self, id: SaId, now_ms: u64) -> bool {
        let Some(cluster) = self.placement.get(&id) else {
            return false;
        };
        match self.clusters.get_mut(cluster).and_then(|ms| ms.iter_mut().find(|m| m.id == id)) {
            Some(sa) => {
                sa.last_active = sa.last_active.max(now_ms);
                true
            }
            None => false,
        }
    }

    pub fn cluster(&self, id: i64) -> Option<&[SensorAgent]> {
        self.clusters.get(&id).map(Vec::as_slice)
    }

    pub fn clusters(&self) -> impl Iterator<Item = (i64, &[SensorAgent])> {
        self.clusters.iter().map(|(k, v)| (*k, v.as_slice()))
    }

    pub fn cluster_count(&self) -> usize {
        self.clusters.len()
    }

    /// Number of stored agents.
    pub fn len(&self) -> usize {
        self.placement.len()
    }

    pub fn is_empty(&self) -> bool {
        self.placement.is_empty()
    }

    pub fn unclassified_inserts(&self) -> u64 {
        self.unclassified_inserts
    }

    /// Learns a clustering program without activating it.
    pub fn synthesize(&mut self, examples: &[IoExample<ListValue>]) -> Result<Synthesis, SynthError> {
        self.synthesizer.learn(&ListRegistry, examples)
    }

    /// Learns and activates a clustering program. On failure the active
    /// program is unchanged.
    pub fn regenerate(&mut self, examples: &[IoExample<ListValue>]) -> Result<DslProgram, SynthError> {
        let found = self.synthesize(examples)?;
        self.program = Some(found.program.clone());
        Ok(found.program)
    }

    /// Re-labels every stored agent with the active program.
    pub fn recluster(&mut self) -> Result<(), DeviceError> {
        let program = self.program.clone().ok_or(DeviceError::NoProgram)?;
        let all: Vec<SensorAgent> = core::mem::take(&mut self.clusters).into_values().flatten().collect();
        self.placement.clear();
        for sa in all {
            let cluster = label(&program, &sa.attributes);
            self.placement.insert(sa.id, cluster);
            self.clusters.entry(cluster).or_default().push(sa);
        }
        Ok(())
    }

    /// Removes clusters whose most recently active member is older than
    /// `ttl` at `now_ms` and returns them for archiving.
    pub fn evict_inactive(&mut self, now_ms: u64, ttl: Duration) -> Vec<ArchivedCluster> {
        let ttl_ms = u64::try_from(ttl.as_millis()).unwrap_or(u64::MAX);
        let stale: Vec<i64> = self
            .clusters
            .iter()
            .filter(|(_, ms)| {
                let newest = ms.iter().map(|m| m.last_active).max().unwrap_or(0);
                newest.saturating_add(ttl_ms) < now_ms
            })
            .map(|(id, _)| *id)
            .collect();
        stale.into_iter().filter_map(|id| self.take_cluster(id)).collect()
    }

    /// Removes every cluster, e.g. for shutdown archiving.
    pub fn drain(&mut self) -> Vec<ArchivedCluster> {
        let ids: Vec<i64> = self.clusters.keys().copied().collect();
        ids.into_iter().filter_map(|id| self.take_cluster(id)).collect()
    }

    fn take_cluster(&mut self, id: i64) -> Option<ArchivedCluster> {
        let members = self.clusters.remove(&id)?;
        for m in &members {
            self.placement.remove(&m.id);
        }
        Some(ArchivedCluster { cluster_id: id, members })
    }

    /// Puts an archived cluster back verbatim. Members stored elsewhere in
    /// the meantime are moved into it.
    pub fn restore(&mut self, archived: ArchivedCluster) {
        for m in &archived.members {
            self.remove(m.id);
        }
        let target = self.clusters.entry(archived.cluster_id).or_default();
        for m in archived.members {
            self.placement.insert(m.id, archived.cluster_id);
            target.push(m);
        }
    }
}

fn label(program: &DslProgram, attributes: &[i64]) -> i64 {
    match evaluate(&ListRegistry, program, &ListValue::List(attributes.to_vec())) {
        Ok(ListValue::Int(v)) => v,
        _ => UNCLASSIFIED,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::list::{HEAD, REST};
    use alloc::vec;

    fn sa(id: SaId, attributes: Vec<i64>, last_active: u64) -> SensorAgent {
        SensorAgent { id, attributes, resource_id: alloc::format!("t/{id}"), location: "t".into(), last_active }
    }

    fn dm(stages: Vec<u8>) -> DeviceManager {
        let mut dm = DeviceManager::default();
        dm.load_program(DslProgram::new(RegistryId::L, stages).unwrap()).unwrap();
        dm
    }

    #[test]
    fn head_and_rest_head_labels() {
        assert_eq!(dm(vec![HEAD]).insert(sa(1, vec![3, 12, 20, 9, 12], 0)), Ok(3));
        assert_eq!(dm(vec![REST, HEAD]).insert(sa(1, vec![8, 9, 7, 6, 5], 0)), Ok(9));
    }

    #[test]
    fn failing_program_goes_unclassified() {
        let mut d = dm(vec![REST, HEAD]);
        assert_eq!(d.insert(sa(1, vec![4], 0)), Ok(UNCLASSIFIED));
        assert_eq!(d.unclassified_inserts(), 1);
        assert_eq!(d.cluster(UNCLASSIFIED).unwrap().len(), 1);
    }

    #[test]
    fn no_program_and_bad_loads() {
        let mut d = DeviceManager::default();
        assert_eq!(d.insert(sa(1, vec![1], 0)), Err(DeviceError::NoProgram));
        d.load_program_text("L: 1\n").unwrap();
        assert!(matches!(d.load_program_text("L: x"), Err(DeviceError::Program(_))));
        assert_eq!(d.program().unwrap().stages(), &[HEAD]);
        assert_eq!(
            d.load_program(DslProgram::identity(RegistryId::I)),
            Err(DeviceError::WrongRegistry(RegistryId::I))
        );
    }

    #[test]
    fn reinsert_moves() {
        let mut d = dm(vec![HEAD]);
        d.insert(sa(1, vec![1, 0], 0)).unwrap();
        d.insert(sa(1, vec![2, 0], 0)).unwrap();
        assert_eq!(d.len(), 1);
        assert!(d.cluster(1).is_none());
        assert_eq!(d.lookup(1).unwrap().0, 2);
    }

    #[test]
    fn lazy_then_eager_recluster() {
        let mut d = dm(vec![HEAD]);
        d.insert(sa(1, vec![1, 7], 0)).unwrap();
        d.load_program(DslProgram::new(RegistryId::L, vec![REST, HEAD]).unwrap()).unwrap();
        assert_eq!(d.lookup(1).unwrap().0, 1);
        d.recluster().unwrap();
        assert_eq!(d.lookup(1).unwrap().0, 7);
    }

    #[test]
    fn evict_and_restore() {
        let mut d = dm(vec![HEAD]);
        d.insert(sa(1, vec![1], 100)).unwrap();
        d.insert(sa(2, vec![2], 100)).unwrap();
        d.touch(2, 5_000);
        assert!(d.evict_inactive(10_000, Duration::MAX).is_empty());
        let gone = d.evict_inactive(5_500, Duration::from_secs(1));
        assert_eq!(gone.len(), 1);
        assert_eq!(gone[0].cluster_id, 1);
        assert!(d.lookup(1).is_none());
        d.restore(gone[0].clone());
        assert_eq!(d.cluster(1).unwrap(), gone[0].members.as_slice());
        assert_eq!(d.len(), 2);
    }
}
