#ifndef GIRAFFE_C_H
#define GIRAFFE_C_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define GD_API __declspec(dllexport)
#else
#define GD_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum gd_status {
  GD_OK = 0,
  GD_ERR_USAGE = 1,
  GD_ERR_VALIDATION = 2,
  GD_ERR_INTERNAL = 3
} gd_status;

typedef struct gd_graph gd_graph;

/* Message for the last failed call on this thread; "" if none. */
GD_API const char* gd_last_error(void);
GD_API void gd_string_free(char* s);
GD_API const char* gd_version(void);

/* NULL strings and zero ints mean "use the default". */
typedef struct gd_build_options {
  const char* model;     /* "D11"; exclusive with depth */
  int depth;
  int width;
  const char* neck;      /* gfpn, fpn, panet, bifpn, none */
  const char* skip;      /* none, dense, log2n */
  const char* cross;     /* queen, none */
  const char* style;     /* concat, sum */
  const char* order;     /* bottom_up, alternating */
  int level_min;
  int level_max;
  const char* backbone;  /* s2d, stub, stub:3=128,4=256,... */
} gd_build_options;

GD_API void gd_build_options_init(gd_build_options* opts);
GD_API gd_status gd_graph_build(const gd_build_options* opts, gd_graph** out);
GD_API gd_status gd_graph_from_json(const char* text, gd_graph** out);
GD_API gd_status gd_graph_to_json(const gd_graph* g, char** out);
GD_API gd_status gd_graph_to_dot(const gd_graph* g, char** out);
GD_API size_t gd_graph_node_count(const gd_graph* g);
GD_API size_t gd_graph_edge_count(const gd_graph* g);
GD_API void gd_graph_free(gd_graph* g);

/* Reports are written to *out in the given format: "table", "json" or "csv". */

GD_API gd_status gd_analyze(const gd_graph* g, const char* input_shape, const char* format, int strict,
                            char** out);

/* input_shape is "HxWxC" or "random". threads == 0 means 1. */
GD_API gd_status gd_forward(const gd_graph* g, const char* input_shape, uint64_t seed, unsigned threads,
                            const char* format, char** out);

typedef struct gd_gradcheck_options {
  const char* suite;  /* primitives, tiny-gfpn, all */
  uint64_t seed;
  double tolerance;
  double step;
  double fault;       /* scales analytic gradients by (1 + fault) */
} gd_gradcheck_options;

GD_API void gd_gradcheck_options_init(gd_gradcheck_options* opts);
/* *passed is set to 1 when every block is within tolerance. */
GD_API gd_status gd_gradcheck(const gd_gradcheck_options* opts, const char* format, char** out, int* passed);
/* Checks every input and weight of a user graph in double precision. */
GD_API gd_status gd_gradcheck_graph(const gd_graph* g, const char* input_shape, const gd_gradcheck_options* opts,
                                    const char* format, char** out, int* passed);

typedef struct gd_topo_options {
  const char* necks;        /* comma separated: fpn,panet,bifpn,gfpn-dense,gfpn-log2n,... */
  int depth;
  int width;
  int level_min;
  int level_max;
  const char* match_flops;  /* neck whose FLOPs the others are fitted to, or NULL */
  const char* input_shape;  /* FLOPs resolution */
} gd_topo_options;

GD_API void gd_topo_options_init(gd_topo_options* opts);
GD_API gd_status gd_topo(const gd_topo_options* opts, const char* format, char** out);

GD_API gd_status gd_family(const char* input_shape, const char* format, char** out);

#ifdef __cplusplus
}
#endif

#endif
