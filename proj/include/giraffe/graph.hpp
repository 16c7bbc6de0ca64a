#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "giraffe/error.hpp"
#include "giraffe/tensor.hpp"

namespace giraffe {

struct NodeId {
  int value = -1;
  friend auto operator<=>(const NodeId&, const NodeId&) = default;
};

enum class FusionStyle { kConcat, kSum };
enum class Role { kBackbone, kNeck };

// Node operation descriptors ---------------------------------------------------

/// The image fed to the network; takes the shape given to infer_shapes.
struct InputOp {
  friend bool operator==(const InputOp&, const InputOp&) = default;
};

/// A pre-computed pyramid feature at a declared stride (backbone stand-in).
struct SourceOp {
  int channels = 0;
  int stride = 1;
  friend bool operator==(const SourceOp&, const SourceOp&) = default;
};

struct ConvOp {
  int out_channels = 0;
  int kernel = 1;
  int stride = 1;
  int padding = 0;
  bool activation = false;  // SiLU after the convolution
  bool bias = true;
  friend bool operator==(const ConvOp&, const ConvOp&) = default;
};

struct SiluOp {
  friend bool operator==(const SiluOp&, const SiluOp&) = default;
};

struct SpaceToDepthOp {
  int block = 2;
  friend bool operator==(const SpaceToDepthOp&, const SpaceToDepthOp&) = default;
};

struct ResampleOp {
  bool up = true;  // bilinear x2 when true, 2x2 max-pool when false
  friend bool operator==(const ResampleOp&, const ResampleOp&) = default;
};

/// Combine transformed inputs (concat or sum), then conv kxk / pad k/2 [+ SiLU].
struct FusionOp {
  FusionStyle style = FusionStyle::kConcat;
  int out_channels = 0;
  int kernel = 3;
  bool activation = true;
  bool bias = true;
  friend bool operator==(const FusionOp&, const FusionOp&) = default;
};

using NodeOp = std::variant<InputOp, SourceOp, ConvOp, SiluOp, SpaceToDepthOp, ResampleOp, FusionOp>;

/// Stable lower-case name of the op kind ("input", "source", "conv", ...).
std::string op_kind_name(const NodeOp& op);

// Edges --------------------------------------------------------------------------

enum class TransformKind { kIdentity, kUpsample2, kDownsample2, kProject };

struct EdgeTransform {
  TransformKind kind = TransformKind::kIdentity;
  int out_channels = 0;  // kProject only

  static EdgeTransform identity() { return {}; }
  static EdgeTransform up() { return {TransformKind::kUpsample2, 0}; }
  static EdgeTransform down() { return {TransformKind::kDownsample2, 0}; }
  static EdgeTransform project(int channels) { return {TransformKind::kProject, channels}; }

  friend bool operator==(const EdgeTransform&, const EdgeTransform&) = default;
};

std::string transform_name(const EdgeTransform& t);

/// Shape produced by applying the edge transform; throws on odd downsample.
Shape apply_transform(const EdgeTransform& t, const Shape& s);

struct GraphEdge {
  NodeId src;
  NodeId dst;
  EdgeTransform transform;
  friend bool operator==(const GraphEdge&, const GraphEdge&) = default;
};

/// A pyramid feature P_k^l (neck) or an anonymous backbone stage.
struct FeatureNode {
  NodeId id;
  std::optional<int> level;  // pyramid level k, stride 2^k
  std::optional<int> layer;  // neck depth index l; 0 = entry projection
  Role role = Role::kNeck;
  std::string label;
  NodeOp op;
  std::optional<Shape> shape;

  friend bool operator==(const FeatureNode&, const FeatureNode&) = default;
};

/// Thrown by toposort/validate when the graph is not a DAG.
class CycleError : public Error {
 public:
  CycleError(const std::string& what, std::vector<NodeId> nodes)
      : Error(ErrorKind::kValidation, what), nodes_(std::move(nodes)) {}
  const std::vector<NodeId>& nodes() const { return nodes_; }

 private:
  std::vector<NodeId> nodes_;
};

/// Typed DAG of feature nodes joined by transform-tagged edges.
///
/// Node ids are dense and assigned in insertion order. The order in which
/// edges into a node were added is part of the graph's identity: fusion
/// nodes concatenate their inputs in exactly that order.
class ArchitectureGraph {
 public:
  ArchitectureGraph() = default;
  explicit ArchitectureGraph(std::string name) : name_(std::move(name)) {}

  NodeId add_node(NodeOp op, Role role, std::string label = {},
                  std::optional<int> level = std::nullopt,
                  std::optional<int> layer = std::nullopt);
  /// Inserts a node with an explicit id (deserialization). Ids must be unique.
  void insert_node(FeatureNode node);
  void add_edge(NodeId src, NodeId dst, EdgeTransform transform = EdgeTransform::identity());
  void add_input(NodeId id) { inputs_.push_back(id); }
  void add_output(NodeId id) { outputs_.push_back(id); }
  void set_outputs(std::vector<NodeId> ids) { outputs_ = std::move(ids); }

  const std::string& name() const { return name_; }
  void set_name(std::string n) { name_ = std::move(n); }
  std::map<std::string, std::string>& metadata() { return metadata_; }
  const std::map<std::string, std::string>& metadata() const { return metadata_; }

  const std::vector<FeatureNode>& nodes() const { return nodes_; }
  const std::vector<GraphEdge>& edges() const { return edges_; }
  const std::vector<NodeId>& inputs() const { return inputs_; }
  const std::vector<NodeId>& outputs() const { return outputs_; }

  bool contains(NodeId id) const;
  const FeatureNode& node(NodeId id) const;
  FeatureNode& mutable_node(NodeId id);

  /// In-edges of `id` in insertion order.
  std::vector<GraphEdge> in_edges(NodeId id) const;
  std::vector<GraphEdge> out_edges(NodeId id) const;

  /// Neck node at (level, layer), if any.
  std::optional<NodeId> find(int level, int layer) const;

  /// Appends every node and edge of `other`, remapping its ids. Returns the
  /// id mapping (old id -> new id). Inputs/outputs of `other` are not merged.
  std::map<NodeId, NodeId> merge(const ArchitectureGraph& other);

  friend bool operator==(const ArchitectureGraph&, const ArchitectureGraph&) = default;

 private:
  std::size_t slot(NodeId id) const;

  std::string name_;
  std::vector<FeatureNode> nodes_;
  std::vector<GraphEdge> edges_;
  std::vector<NodeId> inputs_;
  std::vector<NodeId> outputs_;
  std::map<std::string, std::string> metadata_;
  std::map<int, std::size_t> index_;
};

/// Deterministic topological order; ties resolved by smallest NodeId.
/// Throws CycleError listing the nodes that lie on cycles.
std::vector<NodeId> toposort(const ArchitectureGraph& g);

/// Structural checks: acyclic, every node reachable from an input, every
/// output reachable, unique (level, layer) among neck nodes, arity per op.
void validate(const ArchitectureGraph& g);

/// Largest input-relative stride any node reaches (1 for an empty graph).
int max_stride(const ArchitectureGraph& g);

/// Returns a copy with every node's shape annotated. Requires the input's
/// height and width to be divisible by max_stride(g).
ArchitectureGraph infer_shapes(const ArchitectureGraph& g, const Shape& input_shape);

/// Input channels seen by the conv inside a conv/fusion node (after edge
/// transforms and combination). Requires inferred shapes.
int conv_input_channels(const ArchitectureGraph& g, NodeId id);

}  // namespace giraffe
