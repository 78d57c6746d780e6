//! Finite windows of the infinite directed tree in which every vertex has one
//! parent and `d` children.
//!
//! A window is the set of descendants of an anchor vertex, cut off at a base
//! layer. Layers decrease towards the leaves: the children of a vertex in
//! layer `k` live in layer `k - 1`. Vertices are addressed by the sequence of
//! child indices leading down from the anchor.
//!
//! Internally the samplers use [`Node`], a heap-order numbering of the same
//! vertices (`id(root) = 0`, `id(child c of v) = d * id(v) + c + 1`), which is
//! cheap to hash and needs no allocation.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VertexRef {
    path: Vec<u8>,
    layer: i32,
}

impl VertexRef {
    pub fn path(&self) -> &[u8] {
        &self.path
    }

    pub fn layer(&self) -> i32 {
        self.layer
    }

    pub fn is_root(&self) -> bool {
        self.path.is_empty()
    }

    /// Whether `self` lies in the subtree rooted at `other` (inclusive).
    pub fn is_descendant_of(&self, other: &VertexRef) -> bool {
        self.path.starts_with(&other.path)
    }
}

/// Compact handle of a window vertex: heap index plus layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Node {
    pub id: u64,
    pub layer: i32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TreeWindow {
    arity: u32,
    anchor_layer: i32,
    base_layer: i32,
}

impl TreeWindow {
    pub fn new(arity: u32, anchor_layer: i32, base_layer: i32) -> Result<Self> {
        if !(2..=255).contains(&arity) {
            return Err(Error::InvalidWindow(format!(
                "arity must be in [2, 255], got {arity}"
            )));
        }
        if base_layer > anchor_layer {
            return Err(Error::InvalidWindow(format!(
                "base layer {base_layer} lies above anchor layer {anchor_layer}"
            )));
        }
        Ok(Self {
            arity,
            anchor_layer,
            base_layer,
        })
    }

    pub fn arity(&self) -> u32 {
        self.arity
    }

    pub fn anchor_layer(&self) -> i32 {
        self.anchor_layer
    }

    pub fn base_layer(&self) -> i32 {
        self.base_layer
    }

    /// Number of layers below the anchor, `anchor_layer - base_layer`.
    pub fn depth(&self) -> u32 {
        (self.anchor_layer - self.base_layer) as u32
    }

    pub fn root(&self) -> VertexRef {
        VertexRef {
            path: Vec::new(),
            layer: self.anchor_layer,
        }
    }

    /// Builds the vertex at `path` below the anchor.
    pub fn vertex(&self, path: &[u8]) -> Result<VertexRef> {
        if path.len() > self.depth() as usize {
            return Err(Error::InvalidArgument(format!(
                "path of length {} leaves a window of depth {}",
                path.len(),
                self.depth()
            )));
        }
        if let Some(&c) = path.iter().find(|&&c| u32::from(c) >= self.arity) {
            return Err(Error::InvalidArgument(format!(
                "child index {c} out of range for arity {}",
                self.arity
            )));
        }
        Ok(VertexRef {
            path: path.to_vec(),
            layer: self.anchor_layer - path.len() as i32,
        })
    }

    /// The `d` children of `v`.
    ///
    /// Panics if `v` sits on the base layer: nothing below the base is ever
    /// materialized.
    pub fn children(&self, v: &VertexRef) -> Vec<VertexRef> {
        assert!(
            v.layer > self.base_layer,
            "children requested below the base layer ({} <= {})",
            v.layer,
            self.base_layer
        );
        (0..self.arity as u8)
            .map(|c| {
                let mut path = Vec::with_capacity(v.path.len() + 1);
                path.extend_from_slice(&v.path);
                path.push(c);
                VertexRef {
                    path,
                    layer: v.layer - 1,
                }
            })
            .collect()
    }

    pub fn parent(&self, v: &VertexRef) -> Option<VertexRef> {
        let (_, prefix) = v.path.split_last()?;
        Some(VertexRef {
            path: prefix.to_vec(),
            layer: v.layer + 1,
        })
    }

    /// Total number of window vertices, `sum_{j=0}^{depth} d^j`.
    pub fn subtree_size(&self) -> Result<u64> {
        let d = u64::from(self.arity);
        let mut level = 1u64;
        let mut total = 1u64;
        for _ in 0..self.depth() {
            level = level.checked_mul(d).ok_or(Error::Overflow)?;
            total = total.checked_add(level).ok_or(Error::Overflow)?;
        }
        Ok(total)
    }

    /// Vertices of a single layer, in lexicographic path order.
    pub fn layer_vertices(&self, layer: i32) -> Result<Vec<VertexRef>> {
        if layer > self.anchor_layer || layer < self.base_layer {
            return Err(Error::InvalidArgument(format!(
                "layer {layer} outside window [{}, {}]",
                self.base_layer, self.anchor_layer
            )));
        }
        let mut out = vec![self.root()];
        for _ in layer..self.anchor_layer {
            out = out.iter().flat_map(|v| self.children(v)).collect();
        }
        Ok(out)
    }

    pub fn root_node(&self) -> Node {
        Node {
            id: 0,
            layer: self.anchor_layer,
        }
    }

    pub fn node(&self, v: &VertexRef) -> Result<Node> {
        let d = u64::from(self.arity);
        let mut id = 0u64;
        for &c in &v.path {
            id = id
                .checked_mul(d)
                .and_then(|x| x.checked_add(u64::from(c) + 1))
                .ok_or(Error::Overflow)?;
        }
        Ok(Node { id, layer: v.layer })
    }

    /// Inverse of [`TreeWindow::node`].
    pub fn vertex_of(&self, node: Node) -> VertexRef {
        let d = u64::from(self.arity);
        let mut path = Vec::new();
        let mut id = node.id;
        while id > 0 {
            path.push(((id - 1) % d) as u8);
            id = (id - 1) / d;
        }
        path.reverse();
        VertexRef {
            layer: self.anchor_layer - path.len() as i32,
            path,
        }
    }

    /// Child `c` of `node`; the caller guarantees the result stays in the window.
    #[inline]
    pub fn child_node(&self, node: Node, c: u32) -> Node {
        debug_assert!(node.layer > self.base_layer);
        Node {
            id: node.id * u64::from(self.arity) + u64::from(c) + 1,
            layer: node.layer - 1,
        }
    }

    #[inline]
    pub fn parent_node(&self, node: Node) -> Option<Node> {
        (node.id > 0).then(|| Node {
            id: (node.id - 1) / u64::from(self.arity),
            layer: node.layer + 1,
        })
    }

    /// All window nodes in breadth-first order (ids `0..subtree_size`).
    pub fn nodes(&self) -> Result<impl Iterator<Item = Node> + '_> {
        let size = self.subtree_size()?;
        let d = u64::from(self.arity);
        let mut layer = self.anchor_layer;
        let mut layer_end = 1u64;
        let mut width = 1u64;
        Ok((0..size).map(move |id| {
            if id == layer_end {
                layer -= 1;
                width *= d;
                layer_end += width;
            }
            Node { id, layer }
        }))
    }
}
