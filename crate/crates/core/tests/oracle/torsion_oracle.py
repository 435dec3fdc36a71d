import sympy as sp, itertools
x,y,z,w,a,b=sp.symbols('x y z w a b')
X=[x,y,z,w]
def d1(coeffs):
    # d of 1-form sum c_i dx_i -> dict (i,j) i<j
    out={}
    for i,c in enumerate(coeffs):
        for k in range(4):
            dc=sp.diff(c,X[k])
            if k==i or dc==0: continue
            key=(min(k,i),max(k,i)); sgn=1 if k<i else -1
            out[key]=out.get(key,0)+sgn*dc
    return out
def reduce2(two, theta, pivot):
    # substitute dx_pivot from theta=0 (single theta)
    sol={j:-theta[j]/theta[pivot] for j in range(4) if j!=pivot}
    # dx_p = sum_j sol[j] dx_j
    res={}
    for (i,j),c in two.items():
        li = {i:1} if i!=pivot else sol
        lj = {j:1} if j!=pivot else sol
        for a_,ca in li.items():
            for b_,cb in lj.items():
                if a_==b_: continue
                key=(min(a_,b_),max(a_,b_)); s=1 if a_<b_ else -1
                res[key]=res.get(key,0)+s*c*ca*cb
    return {k:sp.factor(sp.simplify(sp.trigsimp(v))) for k,v in res.items()}
phi=b*x-a*z
f=[phi,1,0,0]; g1=[a*sp.cos(w),sp.sin(w),b*sp.cos(w),0]; g2=[0,0,0,1]
theta=[-b*sp.cos(w), b*phi*sp.cos(w), a*sp.cos(w)-phi*sp.sin(w),0]
for v in (f,g1,g2): print(sp.simplify(sum(t*c for t,c in zip(theta,v))))
T=reduce2(d1(theta),theta,0)
for k,v in sorted(T.items()): print(k,v)
# ex1 and ex2 systems
x_,y_,z_=x,y,z
th=[x*y*z,-x*z,1,0]
X=[x,y,z,w]
print("ex1",reduce2(d1(th),th,2))
th2=[x*y**2,-x*y,1,0]
print("ex2",reduce2(d1(th2),th2,2))
