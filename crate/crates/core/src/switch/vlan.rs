//! Port-based VLAN membership, ingress admission and egress tagging.

use std::collections::{BTreeMap, BTreeSet};

use crate::ether::VlanTag;

pub const DEFAULT_VLAN: u16 = 1;

#[derive(Debug, Clone, PartialEq, Eq)]
struct PortVlans {
    pvid: u16,
    untagged: BTreeSet<u16>,
    tagged: BTreeSet<u16>,
}

impl PortVlans {
    fn is_member(&self, vlan: u16) -> bool {
        self.untagged.contains(&vlan) || self.tagged.contains(&vlan)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Admit {
    Accept(u16),
    Reject,
}

/// Membership map for one switch. Every port starts as an untagged member of
/// VLAN 1; giving a port an untagged membership elsewhere moves it out.
#[derive(Debug, Clone)]
pub struct VlanMap {
    ports: Vec<PortVlans>,
    members: BTreeMap<u16, Vec<u16>>,
    pub violations: u64,
}

impl VlanMap {
    pub fn new(port_count: u16) -> Self {
        let ports = (0..port_count)
            .map(|_| PortVlans {
                pvid: DEFAULT_VLAN,
                untagged: BTreeSet::from([DEFAULT_VLAN]),
                tagged: BTreeSet::new(),
            })
            .collect();
        let mut m = VlanMap {
            ports,
            members: BTreeMap::new(),
            violations: 0,
        };
        m.rebuild();
        m
    }

    pub fn port_count(&self) -> u16 {
        self.ports.len() as u16
    }

    /// Makes `port` an untagged member of `vlan` and sets it as the default.
    pub fn set_untagged(&mut self, port: u16, vlan: u16) {
        let p = &mut self.ports[port as usize];
        p.untagged.clear();
        p.untagged.insert(vlan);
        p.tagged.remove(&vlan);
        p.pvid = vlan;
        self.rebuild();
    }

    pub fn add_tagged(&mut self, port: u16, vlan: u16) {
        let p = &mut self.ports[port as usize];
        if p.untagged.contains(&vlan) {
            p.untagged.remove(&vlan);
        }
        p.tagged.insert(vlan);
        self.rebuild();
    }

    /// Drops the implicit VLAN 1 untagged membership of a tagged-only port.
    pub fn remove_default(&mut self, port: u16) {
        let p = &mut self.ports[port as usize];
        if p.pvid == DEFAULT_VLAN && !p.tagged.contains(&DEFAULT_VLAN) {
            p.untagged.remove(&DEFAULT_VLAN);
        }
        self.rebuild();
    }

    fn rebuild(&mut self) {
        self.members.clear();
        for (i, p) in self.ports.iter().enumerate() {
            for v in p.untagged.iter().chain(p.tagged.iter()) {
                self.members.entry(*v).or_default().push(i as u16);
            }
        }
        for ports in self.members.values_mut() {
            ports.sort_unstable();
            ports.dedup();
        }
    }

    pub fn pvid(&self, port: u16) -> u16 {
        self.ports[port as usize].pvid
    }

    pub fn is_member(&self, port: u16, vlan: u16) -> bool {
        self.ports[port as usize].is_member(vlan)
    }

    pub fn vlans_of(&self, port: u16) -> Vec<u16> {
        let p = &self.ports[port as usize];
        let mut v: Vec<u16> = p.untagged.iter().chain(p.tagged.iter()).copied().collect();
        v.sort_unstable();
        v
    }

    /// Tagged frames are admitted iff the port belongs to the tag's VLAN;
    /// untagged frames go to the port's default VLAN if it is still a member.
    pub fn admit(&mut self, tag: Option<VlanTag>, port: u16) -> Admit {
        let p = &self.ports[port as usize];
        let vlan = tag.map_or(p.pvid, |t| t.vlan_id());
        if p.is_member(vlan) {
            Admit::Accept(vlan)
        } else {
            self.violations += 1;
            Admit::Reject
        }
    }

    pub fn members(&self, vlan: u16) -> &[u16] {
        self.members.get(&vlan).map_or(&[], |v| v.as_slice())
    }

    /// Whether frames of `vlan` leave `port` with a tag.
    pub fn egress_tagged(&self, port: u16, vlan: u16) -> bool {
        self.ports[port as usize].tagged.contains(&vlan)
    }

    pub fn defined_vlans(&self) -> impl Iterator<Item = u16> + '_ {
        self.members.keys().copied()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tag(v: u16) -> Option<VlanTag> {
        Some(VlanTag::new(v, 0).unwrap())
    }

    fn map() -> VlanMap {
        let mut m = VlanMap::new(6);
        for p in 0..3 {
            m.set_untagged(p, 10);
        }
        for p in 3..5 {
            m.set_untagged(p, 20);
        }
        m.add_tagged(5, 10);
        m.add_tagged(5, 20);
        m.remove_default(5);
        m
    }

    #[test]
    fn tagged_frame_on_member_port_is_admitted() {
        let mut m = map();
        assert_eq!(m.admit(tag(10), 5), Admit::Accept(10));
        assert_eq!(m.admit(tag(10), 0), Admit::Accept(10));
    }

    #[test]
    fn tagged_frame_on_foreign_port_is_rejected_and_counted() {
        let mut m = map();
        assert_eq!(m.admit(tag(20), 0), Admit::Reject);
        assert_eq!(m.violations, 1);
    }

    #[test]
    fn untagged_frame_takes_default_vlan() {
        let mut m = map();
        assert_eq!(m.admit(None, 1), Admit::Accept(10));
        assert_eq!(m.admit(None, 4), Admit::Accept(20));
        assert_eq!(m.admit(None, 5), Admit::Reject, "tagged-only port");
    }

    #[test]
    fn membership_and_tagging() {
        let m = map();
        assert_eq!(m.members(10), &[0, 1, 2, 5]);
        assert_eq!(m.members(20), &[3, 4, 5]);
        assert!(m.members(1).is_empty());
        assert!(m.egress_tagged(5, 20));
        assert!(!m.egress_tagged(3, 20));
        assert_eq!(m.vlans_of(5), vec![10, 20]);
    }

    #[test]
    fn fresh_map_is_one_flat_vlan() {
        let mut m = VlanMap::new(4);
        assert_eq!(m.members(DEFAULT_VLAN), &[0, 1, 2, 3]);
        assert_eq!(m.admit(None, 2), Admit::Accept(1));
    }
}
