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

int printf(const char*,...); int snprintf(char*,unsigned long,const char*,...);
unsigned long strlen(const char*);
double sin(double);
struct node { int k; double v; struct node *l, *r; };
static int cmp(const void*a,const void*b){return *(const int*)a-*(const int*)b;}
double f(double x, int n){ double s=0; for(int i=0;i<n;i++) s+=sin(x*i)/(1+i); return s; }
int g(char *buf, int n){ int h=5381; for(int i=0;i<n;i++){ h=h*33^buf[i]; if(buf[i]=='x') break; } return h; }
long long mul(long long a, long long b){ return a*b + (a>>3) - (b<<2); }
void sortit(int *a, int n){ for(int i=0;i<n;i++) for(int j=i+1;j<n;j++) if(a[j]<a[i]){int t=a[i];a[i]=a[j];a[j]=t;} }
struct node* ins(struct node*t, struct node*n){ if(!t) return n; if(n->k<t->k) t->l=ins(t->l,n); else t->r=ins(t->r,n); return t; }
int sw(int x){ switch(x){case 1: return 7; case 2: return 9; case 3: return 11; case 5: return 2; case 8: return 1; default: return -1;} }
float vf(float *a, float *b, int n){ float s=0; for(int i=0;i<n;i++) s+=a[i]*b[i]; return s; }
int main(int c, char**v){ char b[64]; snprintf(b,64,"%d %s",c,v[0]); printf("%d %f %lld\n", g(b,strlen(b)), f(1.5,c), mul(c,7)); return sw(c); }
