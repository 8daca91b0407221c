//! Abstract nodes: partitions of the same-depth state nodes or Q nodes of a
//! search graph, with aggregate statistics and a representative.

use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GroupId(pub u32);

impl fmt::Display for GroupId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "g{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GroupKind {
    State,
    QPair,
}

/// One abstract node. Members are raw node indices of the matching arena.
#[derive(Clone, Debug)]
pub struct AbstractNode {
    pub members: Vec<u32>,
    pub representative: u32,
    /// Number of abstract nodes of this kind created before this one.
    pub creation_id: u64,
    pub depth: u32,
    pub aggregate_visits: u64,
    pub aggregate_return: f64,
    /// Groups all terminal (or horizon) states of a depth.
    pub is_leaf_group: bool,
    depth_pos: u32,
    alive: bool,
}

impl AbstractNode {
    pub fn size(&self) -> usize {
        self.members.len()
    }

    pub fn mean(&self) -> f64 {
        self.aggregate_return / self.aggregate_visits as f64
    }
}

/// Arena of abstract nodes of one kind with a per-depth index. Slots of
/// deleted groups are reused; creation ids are never reused.
#[derive(Clone, Debug)]
pub struct GroupStore {
    kind: GroupKind,
    groups: Vec<AbstractNode>,
    free: Vec<GroupId>,
    by_depth: Vec<Vec<GroupId>>,
    created: u64,
}

impl GroupStore {
    pub fn new(kind: GroupKind) -> Self {
        Self {
            kind,
            groups: Vec::new(),
            free: Vec::new(),
            by_depth: Vec::new(),
            created: 0,
        }
    }

    pub fn kind(&self) -> GroupKind {
        self.kind
    }

    /// Creates a group holding only `member`, which becomes representative.
    pub fn create(&mut self, depth: u32, member: u32, is_leaf_group: bool) -> GroupId {
        if self.by_depth.len() <= depth as usize {
            self.by_depth.resize(depth as usize + 1, Vec::new());
        }
        let layer = &mut self.by_depth[depth as usize];
        let node = AbstractNode {
            members: vec![member],
            representative: member,
            creation_id: self.created,
            depth,
            aggregate_visits: 0,
            aggregate_return: 0.0,
            is_leaf_group,
            depth_pos: layer.len() as u32,
            alive: true,
        };
        self.created += 1;
        let id = match self.free.pop() {
            Some(id) => {
                self.groups[id.0 as usize] = node;
                id
            }
            None => {
                self.groups.push(node);
                GroupId(self.groups.len() as u32 - 1)
            }
        };
        layer.push(id);
        id
    }

    pub fn get(&self, id: GroupId) -> &AbstractNode {
        let g = &self.groups[id.0 as usize];
        debug_assert!(g.alive, "access to deleted group {id}");
        g
    }

    pub(crate) fn get_mut(&mut self, id: GroupId) -> &mut AbstractNode {
        &mut self.groups[id.0 as usize]
    }

    /// Appends a member and returns its position in the member list.
    pub(crate) fn push_member(&mut self, id: GroupId, member: u32) -> u32 {
        let g = self.get_mut(id);
        g.members.push(member);
        g.members.len() as u32 - 1
    }

    /// Removes the member at `pos`. Returns the member that was moved into
    /// `pos` to fill the gap, if any, so the caller can fix its position.
    pub(crate) fn remove_member(&mut self, id: GroupId, pos: u32) -> Option<u32> {
        let g = self.get_mut(id);
        g.members.swap_remove(pos as usize);
        g.members.get(pos as usize).copied()
    }

    /// Deletes an empty group.
    pub(crate) fn delete(&mut self, id: GroupId) {
        let (depth, pos) = {
            let g = self.get_mut(id);
            debug_assert!(g.members.is_empty());
            g.alive = false;
            (g.depth as usize, g.depth_pos as usize)
        };
        let layer = &mut self.by_depth[depth];
        layer.swap_remove(pos);
        if let Some(&moved) = layer.get(pos) {
            self.groups[moved.0 as usize].depth_pos = pos as u32;
        }
        self.free.push(id);
    }

    /// Live groups at `depth`, in no particular order.
    pub fn at_depth(&self, depth: u32) -> &[GroupId] {
        self.by_depth.get(depth as usize).map_or(&[], |v| v.as_slice())
    }

    pub fn iter(&self) -> impl Iterator<Item = (GroupId, &AbstractNode)> {
        self.groups
            .iter()
            .enumerate()
            .filter(|(_, g)| g.alive)
            .map(|(i, g)| (GroupId(i as u32), g))
    }

    pub fn len(&self) -> usize {
        self.groups.len() - self.free.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of groups created so far, including deleted ones.
    pub fn created(&self) -> u64 {
        self.created
    }
}
