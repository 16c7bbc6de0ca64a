#include "giraffe/model.hpp"

#include "giraffe/scaling.hpp"

namespace giraffe {

std::pair<int, int> resolve_dims(const ModelSpec& spec) {
  if (spec.model && spec.depth)
    fail_usage("--model and --depth are mutually exclusive");
  if (!spec.model && !spec.depth && spec.neck != "gfpn") return {1, spec.width.value_or(kBaseWidth)};
  if (spec.model || !spec.depth) {
    const std::string name = spec.model.value_or(kDefaultModel);
    auto entry = find_family_entry(name);
    if (!entry) fail_usage("unknown model '" + name + "' (expected D7, D11, D14, D16, D25, D29)");
    return {entry->derived_depth, spec.width.value_or(entry->derived_width)};
  }
  return {*spec.depth, spec.width.value_or(kBaseWidth)};
}

ArchitectureGraph build_backbone(const std::string& backbone) {
  if (backbone == "s2d") return build_s2d_chain();
  if (backbone == "stub") return build_pyramid_stub(default_stub_config());
  if (backbone.rfind("stub:", 0) == 0) return build_pyramid_stub(parse_stub_spec(backbone.substr(5)));
  fail_usage("unknown backbone '" + backbone + "' (expected s2d, stub, stub:<level>=<channels>,...)");
}

ArchitectureGraph build_model(const ModelSpec& spec) {
  ArchitectureGraph backbone = build_backbone(spec.backbone);
  if (spec.neck == "none") {
    if (spec.model || spec.depth) fail_usage("--neck none takes no depth or model");
    return backbone;
  }
  const auto [depth, width] = resolve_dims(spec);
  if (depth < 1) fail_validation("neck depth must be >= 1");
  if (width < 1) fail_validation("neck width must be >= 1");
  const Pyramid pyramid = pyramid_of(backbone);
  const NeckKind kind = parse_neck_kind(spec.neck);
  ArchitectureGraph neck;
  switch (kind) {
    case NeckKind::kGfpn: {
      GfpnConfig cfg;
      cfg.depth = depth;
      cfg.width = width;
      cfg.skip_mode = spec.skip_mode;
      cfg.cross_scale = spec.cross_scale;
      cfg.fusion_style = spec.fusion_style;
      cfg.levels = spec.levels;
      cfg.within_layer_order = spec.within_layer_order;
      neck = build_gfpn(cfg, pyramid);
      break;
    }
    case NeckKind::kFpn: neck = build_fpn(spec.levels, width, pyramid, depth); break;
    case NeckKind::kPanet: neck = build_panet(spec.levels, width, pyramid, depth); break;
    case NeckKind::kBifpn: neck = build_bifpn(spec.levels, width, pyramid, depth); break;
  }
  ArchitectureGraph g = compose(backbone, neck);
  std::optional<std::string> model = spec.model;
  if (!model && !spec.depth && kind == NeckKind::kGfpn) model = kDefaultModel;
  if (model) {
    g.metadata()["model"] = *model;
    g.set_name("giraffedet-" + *model);
  }
  validate(g);
  return g;
}

}  // namespace giraffe
