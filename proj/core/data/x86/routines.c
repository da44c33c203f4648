// Copyright 2026 The PackSense Authors. All rights reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

/* Freestanding routines compiled into the real-code fixtures. Build with
 *   clang -m32 -ffreestanding -fno-builtin -c routines.c
 * and extract .text with objcopy; see regenerate.sh. */

typedef unsigned int u32;
typedef unsigned char u8;
typedef unsigned long long u64;
typedef __builtin_va_list va_list;

extern void* ext_alloc(u32 n);
extern void ext_free(void* p);
extern int ext_write(int fd, const void* buf, u32 n);
extern int ext_read(int fd, void* buf, u32 n);
extern double ext_sqrt(double x);

struct list { struct list* next; int key; void* data; };
struct tree { struct tree* l; struct tree* r; int key; int height; };
struct buf { u8* p; u32 len; u32 cap; };
struct point { double x, y; };
struct matrix { int rows, cols; double* v; };

static u32 crc_table[256];

u32 str_len(const char* s) { const char* p = s; while (*p) ++p; return (u32)(p - s); }
int str_cmp(const char* a, const char* b) { while (*a && *a == *b) { ++a; ++b; } return (u8)*a - (u8)*b; }
char* str_cpy(char* d, const char* s) { char* r = d; while ((*d++ = *s++)) {} return r; }
char* str_chr(const char* s, int c) { for (; *s; ++s) if (*s == (char)c) return (char*)s; return 0; }
void* mem_set(void* d, int c, u32 n) { u8* p = d; while (n--) *p++ = (u8)c; return d; }
void* mem_cpy(void* d, const void* s, u32 n) { u8* a = d; const u8* b = s; while (n--) *a++ = *b++; return d; }
int mem_cmp(const void* x, const void* y, u32 n) {
  const u8* a = x; const u8* b = y;
  for (u32 i = 0; i < n; ++i) if (a[i] != b[i]) return a[i] < b[i] ? -1 : 1;
  return 0;
}
void* mem_move(void* d, const void* s, u32 n) {
  u8* a = d; const u8* b = s;
  if (a < b) { while (n--) *a++ = *b++; }
  else { a += n; b += n; while (n--) *--a = *--b; }
  return d;
}

int parse_int(const char* s, int* out) {
  int sign = 1, v = 0;
  while (*s == ' ' || *s == '\t') ++s;
  if (*s == '-') { sign = -1; ++s; } else if (*s == '+') ++s;
  if (*s < '0' || *s > '9') return 0;
  while (*s >= '0' && *s <= '9') v = v * 10 + (*s++ - '0');
  *out = v * sign;
  return 1;
}

u32 parse_hex(const char* s) {
  u32 v = 0;
  for (;; ++s) {
    int c = *s, d;
    if (c >= '0' && c <= '9') d = c - '0';
    else if (c >= 'a' && c <= 'f') d = c - 'a' + 10;
    else if (c >= 'A' && c <= 'F') d = c - 'A' + 10;
    else break;
    v = (v << 4) | (u32)d;
  }
  return v;
}

int fmt_uint(char* out, u32 v, int base) {
  char tmp[33]; int n = 0, i = 0;
  do { int d = (int)(v % (u32)base); tmp[n++] = (char)(d < 10 ? '0' + d : 'a' + d - 10); v /= (u32)base; } while (v);
  while (n) out[i++] = tmp[--n];
  out[i] = 0;
  return i;
}

int format(char* out, u32 cap, const char* f, ...) {
  va_list ap; u32 o = 0;
  __builtin_va_start(ap, f);
  for (; *f && o + 1 < cap; ++f) {
    if (*f != '%') { out[o++] = *f; continue; }
    ++f;
    char num[34];
    switch (*f) {
      case 'd': { int v = __builtin_va_arg(ap, int); if (v < 0) { out[o++] = '-'; v = -v; }
                  int n = fmt_uint(num, (u32)v, 10); for (int i = 0; i < n && o + 1 < cap; ++i) out[o++] = num[i]; break; }
      case 'x': { int n = fmt_uint(num, __builtin_va_arg(ap, u32), 16); for (int i = 0; i < n && o + 1 < cap; ++i) out[o++] = num[i]; break; }
      case 's': { const char* s = __builtin_va_arg(ap, const char*); while (*s && o + 1 < cap) out[o++] = *s++; break; }
      case 'c': out[o++] = (char)__builtin_va_arg(ap, int); break;
      case '%': out[o++] = '%'; break;
      default: out[o++] = '?'; break;
    }
  }
  __builtin_va_end(ap);
  out[o] = 0;
  return (int)o;
}

void crc_init(void) {
  for (u32 i = 0; i < 256; ++i) {
    u32 c = i;
    for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
    crc_table[i] = c;
  }
}
u32 crc32(const u8* p, u32 n) {
  u32 c = 0xFFFFFFFFu;
  while (n--) c = crc_table[(c ^ *p++) & 0xFF] ^ (c >> 8);
  return c ^ 0xFFFFFFFFu;
}
u32 fnv1a(const u8* p, u32 n) { u32 h = 2166136261u; while (n--) { h ^= *p++; h *= 16777619u; } return h; }
u32 adler32(const u8* p, u32 n) {
  u32 a = 1, b = 0;
  while (n--) { a = (a + *p++) % 65521u; b = (b + a) % 65521u; }
  return (b << 16) | a;
}
u32 murmur_mix(u32 h) { h ^= h >> 16; h *= 0x85ebca6bu; h ^= h >> 13; h *= 0xc2b2ae35u; h ^= h >> 16; return h; }

void insertion_sort(int* a, int n) {
  for (int i = 1; i < n; ++i) { int v = a[i], j = i - 1; while (j >= 0 && a[j] > v) { a[j + 1] = a[j]; --j; } a[j + 1] = v; }
}
static void swap_int(int* a, int* b) { int t = *a; *a = *b; *b = t; }
void quick_sort(int* a, int lo, int hi) {
  while (lo < hi) {
    int p = a[(lo + hi) / 2], i = lo, j = hi;
    while (i <= j) { while (a[i] < p) ++i; while (a[j] > p) --j; if (i <= j) swap_int(&a[i++], &a[j--]); }
    if (j - lo < hi - i) { quick_sort(a, lo, j); lo = i; } else { quick_sort(a, i, hi); hi = j; }
  }
}
static void sift(int* a, int start, int end) {
  int root = start;
  while (2 * root + 1 <= end) {
    int child = 2 * root + 1, sw = root;
    if (a[sw] < a[child]) sw = child;
    if (child + 1 <= end && a[sw] < a[child + 1]) sw = child + 1;
    if (sw == root) return;
    swap_int(&a[root], &a[sw]); root = sw;
  }
}
void heap_sort(int* a, int n) {
  for (int s = (n - 2) / 2; s >= 0; --s) sift(a, s, n - 1);
  for (int e = n - 1; e > 0; --e) { swap_int(&a[e], &a[0]); sift(a, 0, e - 1); }
}
int binary_search(const int* a, int n, int key) {
  int lo = 0, hi = n - 1;
  while (lo <= hi) { int m = lo + (hi - lo) / 2; if (a[m] == key) return m; if (a[m] < key) lo = m + 1; else hi = m - 1; }
  return -1;
}

struct list* list_push(struct list* head, int key, void* data) {
  struct list* n = ext_alloc(sizeof *n);
  if (!n) return head;
  n->next = head; n->key = key; n->data = data;
  return n;
}
struct list* list_reverse(struct list* h) {
  struct list* prev = 0;
  while (h) { struct list* nx = h->next; h->next = prev; prev = h; h = nx; }
  return prev;
}
struct list* list_find(struct list* h, int key) { for (; h; h = h->next) if (h->key == key) return h; return 0; }
void list_free(struct list* h) { while (h) { struct list* nx = h->next; ext_free(h); h = nx; } }
int list_len(const struct list* h) { int n = 0; for (; h; h = h->next) ++n; return n; }

static int height(struct tree* t) { return t ? t->height : 0; }
static int imax(int a, int b) { return a > b ? a : b; }
static struct tree* rot_r(struct tree* y) {
  struct tree* x = y->l; y->l = x->r; x->r = y;
  y->height = imax(height(y->l), height(y->r)) + 1; x->height = imax(height(x->l), height(x->r)) + 1;
  return x;
}
static struct tree* rot_l(struct tree* x) {
  struct tree* y = x->r; x->r = y->l; y->l = x;
  x->height = imax(height(x->l), height(x->r)) + 1; y->height = imax(height(y->l), height(y->r)) + 1;
  return y;
}
struct tree* avl_insert(struct tree* t, int key) {
  if (!t) { t = ext_alloc(sizeof *t); t->l = t->r = 0; t->key = key; t->height = 1; return t; }
  if (key < t->key) t->l = avl_insert(t->l, key);
  else if (key > t->key) t->r = avl_insert(t->r, key);
  else return t;
  t->height = 1 + imax(height(t->l), height(t->r));
  int bal = height(t->l) - height(t->r);
  if (bal > 1 && key < t->l->key) return rot_r(t);
  if (bal < -1 && key > t->r->key) return rot_l(t);
  if (bal > 1 && key > t->l->key) { t->l = rot_l(t->l); return rot_r(t); }
  if (bal < -1 && key < t->r->key) { t->r = rot_r(t->r); return rot_l(t); }
  return t;
}
int tree_sum(const struct tree* t) { return t ? t->key + tree_sum(t->l) + tree_sum(t->r) : 0; }

int buf_reserve(struct buf* b, u32 need) {
  if (b->len + need <= b->cap) return 1;
  u32 cap = b->cap ? b->cap * 2 : 64;
  while (cap < b->len + need) cap *= 2;
  u8* p = ext_alloc(cap);
  if (!p) return 0;
  mem_cpy(p, b->p, b->len);
  ext_free(b->p);
  b->p = p; b->cap = cap;
  return 1;
}
int buf_append(struct buf* b, const void* d, u32 n) {
  if (!buf_reserve(b, n)) return 0;
  mem_cpy(b->p + b->len, d, n); b->len += n;
  return 1;
}
int buf_flush(struct buf* b, int fd) {
  u32 off = 0;
  while (off < b->len) { int w = ext_write(fd, b->p + off, b->len - off); if (w <= 0) return -1; off += (u32)w; }
  b->len = 0;
  return 0;
}

u64 mul64(u64 a, u64 b) { return a * b; }
u64 div64(u64 a, u64 b) { return b ? a / b : 0; }
u64 rotl64(u64 x, int r) { return (x << r) | (x >> (64 - r)); }
u64 xorshift(u64* s) { u64 x = *s; x ^= x << 13; x ^= x >> 7; x ^= x << 17; return *s = x; }
int bignum_add(u32* r, const u32* a, const u32* b, int n) {
  u64 c = 0;
  for (int i = 0; i < n; ++i) { c += (u64)a[i] + b[i]; r[i] = (u32)c; c >>= 32; }
  return (int)c;
}
void bignum_mul(u32* r, const u32* a, const u32* b, int n) {
  for (int i = 0; i < 2 * n; ++i) r[i] = 0;
  for (int i = 0; i < n; ++i) {
    u64 c = 0;
    for (int j = 0; j < n; ++j) { c += (u64)a[i] * b[j] + r[i + j]; r[i + j] = (u32)c; c >>= 32; }
    r[i + n] = (u32)c;
  }
}
int popcount32(u32 x) { x = x - ((x >> 1) & 0x55555555u); x = (x & 0x33333333u) + ((x >> 2) & 0x33333333u); return (int)((((x + (x >> 4)) & 0x0F0F0F0Fu) * 0x01010101u) >> 24); }
u32 gcd(u32 a, u32 b) { while (b) { u32 t = a % b; a = b; b = t; } return a; }
u32 powmod(u32 b, u32 e, u32 m) { u64 r = 1, x = b % m; while (e) { if (e & 1) r = r * x % m; x = x * x % m; e >>= 1; } return (u32)r; }
int is_prime(u32 n) { if (n < 2) return 0; for (u32 d = 2; d * d <= n; ++d) if (n % d == 0) return 0; return 1; }

double dot(const double* a, const double* b, int n) { double s = 0; for (int i = 0; i < n; ++i) s += a[i] * b[i]; return s; }
double dist(struct point a, struct point b) { double dx = a.x - b.x, dy = a.y - b.y; return ext_sqrt(dx * dx + dy * dy); }
double polygon_area(const struct point* p, int n) {
  double s = 0;
  for (int i = 0; i < n; ++i) { int j = (i + 1) % n; s += p[i].x * p[j].y - p[j].x * p[i].y; }
  return s < 0 ? -s / 2 : s / 2;
}
int mat_mul(struct matrix* r, const struct matrix* a, const struct matrix* b) {
  if (a->cols != b->rows) return 0;
  for (int i = 0; i < a->rows; ++i)
    for (int j = 0; j < b->cols; ++j) {
      double s = 0;
      for (int k = 0; k < a->cols; ++k) s += a->v[i * a->cols + k] * b->v[k * b->cols + j];
      r->v[i * b->cols + j] = s;
    }
  r->rows = a->rows; r->cols = b->cols;
  return 1;
}
float lerp(float a, float b, float t) { return a + (b - a) * t; }
int to_fixed(double v) { return (int)(v * 65536.0); }
double horner(const double* c, int n, double x) { double r = 0; for (int i = n - 1; i >= 0; --i) r = r * x + c[i]; return r; }
double newton_sqrt(double v) { double x = v > 1 ? v : 1; for (int i = 0; i < 20; ++i) x = 0.5 * (x + v / x); return x; }

enum tok { T_END, T_NUM, T_ID, T_OP, T_LP, T_RP, T_ERR };
int lex(const char** ps, int* val) {
  const char* s = *ps;
  while (*s == ' ') ++s;
  int t;
  if (!*s) t = T_END;
  else if (*s >= '0' && *s <= '9') { int v = 0; while (*s >= '0' && *s <= '9') v = v * 10 + *s++ - '0'; *val = v; t = T_NUM; }
  else if ((*s >= 'a' && *s <= 'z') || *s == '_') { while ((*s >= 'a' && *s <= 'z') || *s == '_') ++s; t = T_ID; }
  else if (*s == '(') { ++s; t = T_LP; }
  else if (*s == ')') { ++s; t = T_RP; }
  else if (str_chr("+-*/%", *s)) { *val = *s++; t = T_OP; }
  else { ++s; t = T_ERR; }
  *ps = s;
  return t;
}
int eval_rpn(const int* ops, int n) {
  int st[32], sp = 0;
  for (int i = 0; i < n; ++i) {
    int o = ops[i];
    if (o >= 0) { if (sp < 32) st[sp++] = o; continue; }
    if (sp < 2) return 0;
    int b = st[--sp], a = st[--sp];
    switch (-o) {
      case '+': st[sp++] = a + b; break;
      case '-': st[sp++] = a - b; break;
      case '*': st[sp++] = a * b; break;
      case '/': st[sp++] = b ? a / b : 0; break;
      case '%': st[sp++] = b ? a % b : 0; break;
      case '&': st[sp++] = a & b; break;
      case '|': st[sp++] = a | b; break;
      default: return 0;
    }
  }
  return sp ? st[sp - 1] : 0;
}
int state_machine(const u8* in, u32 n) {
  int state = 0, count = 0;
  for (u32 i = 0; i < n; ++i) {
    u8 c = in[i];
    switch (state) {
      case 0: state = c == '<' ? 1 : 0; break;
      case 1: state = c == '/' ? 2 : (c == '>' ? 0 : 3); break;
      case 2: state = c == '>' ? 0 : 2; break;
      case 3: if (c == '>') { ++count; state = 0; } else if (c == '"') state = 4; break;
      case 4: state = c == '"' ? 3 : 4; break;
      default: state = 0;
    }
  }
  return count;
}
int copy_stream(int in, int out) {
  u8 block[512]; int total = 0;
  for (;;) {
    int r = ext_read(in, block, sizeof block);
    if (r < 0) return -1;
    if (r == 0) break;
    if (ext_write(out, block, (u32)r) != r) return -1;
    total += r;
  }
  return total;
}
void rc4_init(u8* s, const u8* key, u32 len) {
  for (int i = 0; i < 256; ++i) s[i] = (u8)i;
  for (int i = 0, j = 0; i < 256; ++i) { j = (j + s[i] + key[i % len]) & 255; u8 t = s[i]; s[i] = s[j]; s[j] = t; }
}
void rc4_xor(u8* s, u8* d, u32 n) {
  int i = 0, j = 0;
  while (n--) { i = (i + 1) & 255; j = (j + s[i]) & 255; u8 t = s[i]; s[i] = s[j]; s[j] = t; *d++ ^= s[(s[i] + s[j]) & 255]; }
}
u32 base64_encode(char* out, const u8* in, u32 n) {
  static const char tbl[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  u32 o = 0, i = 0;
  for (; i + 2 < n; i += 3) {
    u32 v = (u32)in[i] << 16 | (u32)in[i + 1] << 8 | in[i + 2];
    out[o++] = tbl[v >> 18]; out[o++] = tbl[(v >> 12) & 63]; out[o++] = tbl[(v >> 6) & 63]; out[o++] = tbl[v & 63];
  }
  if (i < n) {
    u32 v = (u32)in[i] << 16 | (i + 1 < n ? (u32)in[i + 1] << 8 : 0);
    out[o++] = tbl[v >> 18]; out[o++] = tbl[(v >> 12) & 63];
    out[o++] = i + 1 < n ? tbl[(v >> 6) & 63] : '='; out[o++] = '=';
  }
  out[o] = 0;
  return o;
}
int utf8_decode(const u8* s, u32 n, u32* cp) {
  if (!n) return 0;
  if (s[0] < 0x80) { *cp = s[0]; return 1; }
  if ((s[0] & 0xE0) == 0xC0 && n >= 2) { *cp = (u32)(s[0] & 0x1F) << 6 | (s[1] & 0x3F); return 2; }
  if ((s[0] & 0xF0) == 0xE0 && n >= 3) { *cp = (u32)(s[0] & 0x0F) << 12 | (u32)(s[1] & 0x3F) << 6 | (s[2] & 0x3F); return 3; }
  if ((s[0] & 0xF8) == 0xF0 && n >= 4) {
    *cp = (u32)(s[0] & 0x07) << 18 | (u32)(s[1] & 0x3F) << 12 | (u32)(s[2] & 0x3F) << 6 | (s[3] & 0x3F);
    return 4;
  }
  return -1;
}
